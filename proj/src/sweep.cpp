#include "tfmm/sweep.hpp"

#include <chrono>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#ifndef TFMM_VERSION
#define TFMM_VERSION "unknown"
#endif

namespace tfmm {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Larger trade and weight-change caps loosen the guardrails; a larger
// minimum weight tightens them.
bool ascending_is_looser(Rail r) { return r != Rail::min_weight; }

std::string rail_key(Rail r) {
  switch (r) {
    case Rail::trade_size: return "max_trade_fraction";
    case Rail::min_weight: return "min_weight";
    case Rail::weight_change: return "max_weight_change";
  }
  return "unknown";
}

}  // namespace

SweepResult run_sweep(const SweepConfig& config, int threads) {
  config.validate();
  const auto start = Clock::now();
  const std::size_t cells = config.cell_count();
  const auto restarts = static_cast<std::size_t>(config.n_restarts);

  // Every (cell, restart) pair is an independent work item; results are
  // stored by index and reduced per cell afterwards.
  std::vector<RestartResult> items(cells * restarts);
  std::vector<double> item_seconds(items.size(), 0.0);
  std::vector<SearchSpec> specs;
  specs.reserve(cells);
  for (std::size_t ia = 0; ia < config.grid_a.size(); ++ia)
    for (std::size_t ib = 0; ib < config.grid_b.size(); ++ib) specs.push_back(config.search_spec(ia, ib));

  parallel_for(items.size(), threads, [&](std::size_t i) {
    const auto t0 = Clock::now();
    items[i] = run_restart(specs[i / restarts], static_cast<int>(i % restarts));
    item_seconds[i] = seconds_since(t0);
  });

  SweepResult result;
  result.threads = threads;
  result.cells.reserve(cells);
  for (std::size_t c = 0; c < cells; ++c) {
    const auto first = items.begin() + static_cast<std::ptrdiff_t>(c * restarts);
    const std::vector<RestartResult> slice(first, first + static_cast<std::ptrdiff_t>(restarts));
    const BestAttack best = reduce_restarts(specs[c], slice);
    double cell_seconds = 0;
    for (std::size_t r = 0; r < restarts; ++r) cell_seconds += item_seconds[c * restarts + r];
    const Guardrails& g = specs[c].guardrails;
    result.cells.push_back({g.max_trade_fraction, g.min_weight, g.max_weight_change, best.z_norm,
                            best.z_bound_norm, best.found, best.restarts_used, best.oracle_failures,
                            config.record_wall_time ? cell_seconds : 0.0});
  }
  result.frontier_violations = scan_frontier(config, result.cells);
  result.wall_time_s = seconds_since(start);
  return result;
}

std::vector<FrontierViolation> scan_frontier(const SweepConfig& config,
                                             const std::vector<SweepCellResult>& cells) {
  const std::size_t na = config.grid_a.size();
  const std::size_t nb = config.grid_b.size();
  const auto [ra, rb] = config.varying_rails();
  std::vector<FrontierViolation> violations;
  // Walks one grid line from strictest to loosest; any found cell stricter
  // than a not-found cell is a violation against the loosest such cell.
  auto scan_line = [&](std::vector<std::size_t> line, bool ascending_looser) {
    if (!ascending_looser) std::reverse(line.begin(), line.end());
    for (std::size_t s = 0; s < line.size(); ++s) {
      if (!cells[line[s]].found) continue;
      for (std::size_t l = line.size(); l-- > s + 1;) {
        if (!cells[line[l]].found) {
          violations.push_back({line[s], line[l], cells[line[s]].z_norm});
          break;
        }
      }
    }
  };
  for (std::size_t ia = 0; ia < na; ++ia) {
    std::vector<std::size_t> line;
    for (std::size_t ib = 0; ib < nb; ++ib) line.push_back(ia * nb + ib);
    scan_line(line, ascending_is_looser(rb));
  }
  for (std::size_t ib = 0; ib < nb; ++ib) {
    std::vector<std::size_t> line;
    for (std::size_t ia = 0; ia < na; ++ia) line.push_back(ia * nb + ib);
    scan_line(line, ascending_is_looser(ra));
  }
  return violations;
}

std::string format_number(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  return std::string(buf, ptr);
}

std::string sweep_csv(const SweepResult& result) {
  std::string out = std::string(kSweepCsvHeader) + "\n";
  for (const auto& c : result.cells) {
    out += format_number(c.max_trade_fraction) + ',' + format_number(c.min_weight) + ',' +
           format_number(c.max_weight_change) + ',' + format_number(c.z_norm) + ',' + (c.found ? "1" : "0") + ',' +
           std::to_string(c.restarts) + ',' + std::to_string(c.oracle_failures) + ',' +
           format_number(c.wall_time_s) + '\n';
  }
  return out;
}

Json sweep_metadata(const SweepConfig& config, const SweepResult& result) {
  const auto [ra, rb] = config.varying_rails();
  Json cfg;
  cfg["fixed_rail"] = rail_key(config.fixed_rail);
  cfg["fixed_value"] = config.fixed_value;
  cfg["grid_a_rail"] = rail_key(ra);
  cfg["grid_a"] = config.grid_a;
  cfg["grid_b_rail"] = rail_key(rb);
  cfg["grid_b"] = config.grid_b;
  cfg["n_tokens"] = config.n_tokens;
  cfg["gamma"] = config.gamma;
  cfg["n_restarts"] = config.n_restarts;
  cfg["max_iters"] = config.max_iters;
  cfg["learning_rate"] = config.schedule.learning_rate;
  cfg["final_rate_fraction"] = config.schedule.final_rate_fraction;
  cfg["beta1"] = config.schedule.beta1;
  cfg["beta2"] = config.schedule.beta2;
  cfg["adam_epsilon"] = config.schedule.adam_epsilon;
  cfg["patience"] = config.schedule.patience;
  cfg["fd_step"] = config.schedule.fd_step;
  cfg["master_seed"] = config.master_seed;
  cfg["output"] = config.output.string();
  cfg["parallelism"] = config.parallelism;
  cfg["record_wall_time"] = config.record_wall_time;

  Json j;
  j["version"] = TFMM_VERSION;
  j["config"] = cfg;
  j["seed"] = config.master_seed;
  j["total_cells"] = result.cells.size();
  j["total_restarts"] = result.cells.size() * static_cast<std::size_t>(config.n_restarts);
  j["cells_found"] = std::count_if(result.cells.begin(), result.cells.end(), [](const auto& c) { return c.found; });
  Json bounds = Json::array();
  for (const auto& c : result.cells) bounds.push_back(c.z_bound_norm);
  j["z_bound_norm"] = bounds;
  Json frontier = Json::array();
  for (const auto& v : result.frontier_violations) {
    Json item;
    item["strict_cell"] = v.strict_cell;
    item["loose_cell"] = v.loose_cell;
    item["z_norm"] = v.z_norm;
    frontier.push_back(item);
  }
  j["frontier_violations"] = frontier;
  if (config.record_wall_time) {
    j["wall_time_s"] = result.wall_time_s;
    j["threads"] = result.threads;
  }
  return j;
}

void write_file_atomically(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw std::runtime_error("cannot replace " + path.string() + ": " + ec.message());
  }
}

void write_sweep_outputs(const SweepConfig& config, const SweepResult& result) {
  write_file_atomically(config.output, sweep_csv(result));
  std::filesystem::path sidecar = config.output;
  sidecar += ".json";
  write_file_atomically(sidecar, sweep_metadata(config, result).dump(2) + "\n");
}

std::vector<double> stepped_grid(double lo, double hi, double step) {
  detail::require(step > 0 && hi >= lo, "grid needs lo <= hi and a positive step");
  const auto count = static_cast<std::size_t>(std::llround((hi - lo) / step)) + 1;
  std::vector<double> grid(count);
  for (std::size_t i = 0; i < count; ++i) grid[i] = lo + static_cast<double>(i) * step;
  grid.back() = hi;
  return grid;
}

std::string safe_region_csv(const SafeRegion<double>& region) {
  std::string out = "w,dw,safe,binding\n";
  for (Eigen::Index i = 0; i < region.safe.rows(); ++i)
    for (Eigen::Index j = 0; j < region.safe.cols(); ++j) {
      out += format_number(region.w_grid[static_cast<std::size_t>(i)]) + ',' +
             format_number(region.dw_grid[static_cast<std::size_t>(j)]) + ',' + (region.safe(i, j) ? "1" : "0") +
             ',' + std::string(to_string(region.binding_at(i, j))) + '\n';
    }
  return out;
}

void emit_safe_region(std::vector<double> w_grid, std::vector<double> dw_grid, double gamma, double cap,
                      const std::filesystem::path& output) {
  const auto region = safe_region(std::move(w_grid), std::move(dw_grid), gamma, cap);
  write_file_atomically(output, safe_region_csv(region));
}

}  // namespace tfmm
