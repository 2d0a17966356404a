// Guardrail sweeps: one rail held fixed, the other two varied over a grid,
// one adversarial search per cell.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tfmm/bounds.hpp"
#include "tfmm/json_io.hpp"
#include "tfmm/optimizer.hpp"

namespace tfmm {

// Sweep configuration. The two varying rails are the ones not fixed, taken
// in the order trade size, min weight, weight change; grid_a belongs to the
// first of them and grid_b to the second.
struct SweepConfig {
  Rail fixed_rail = Rail::trade_size;
  double fixed_value = 0.1;
  std::vector<double> grid_a;
  std::vector<double> grid_b;
  int n_tokens = 3;
  double gamma = 0.997;
  int n_restarts = 256;
  int max_iters = 300;
  StepSchedule schedule;
  std::uint64_t master_seed = 0;
  std::filesystem::path output = "sweep.csv";
  int parallelism = 1;
  bool record_wall_time = false;

  std::pair<Rail, Rail> varying_rails() const;
  Guardrails guardrails_at(std::size_t ia, std::size_t ib) const;
  SearchSpec search_spec(std::size_t ia, std::size_t ib) const;
  std::size_t cell_count() const { return grid_a.size() * grid_b.size(); }

  // Throws ConfigError naming the offending field.
  void validate() const;
};

// Configuration problem, with the 1-based line (0 if not tied to a line)
// and the field involved.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(int line, std::string field, const std::string& message);
  int line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  int line_;
  std::string field_;
};

// Flat `key = value` text, `#` starts a comment. Grids are written as
// `[v1, v2, ...]`, `linspace(lo, hi, n)` or `geomspace(lo, hi, n)`.
SweepConfig parse_sweep_config(std::istream& in);
SweepConfig load_sweep_config(const std::filesystem::path& path);

// Worker count: TFMM_GUARD_THREADS if set to a positive integer, else the hint.
int resolve_threads(int hint);

struct SweepCellResult {
  double max_trade_fraction;
  double min_weight;
  double max_weight_change;
  double z_norm;
  double z_bound_norm;
  bool found;
  int restarts;
  int oracle_failures;
  double wall_time_s;
};

// A stricter setting on a grid line reported an attack that a looser
// setting on the same line did not.
struct FrontierViolation {
  std::size_t strict_cell;
  std::size_t loose_cell;
  double z_norm;  // attack value at the stricter cell
};

struct SweepResult {
  std::vector<SweepCellResult> cells;  // row-major over (grid_a, grid_b)
  std::vector<FrontierViolation> frontier_violations;
  double wall_time_s = 0;
  int threads = 1;
};

SweepResult run_sweep(const SweepConfig& config, int threads);

// Frontier consistency along every grid line of the sweep.
std::vector<FrontierViolation> scan_frontier(const SweepConfig& config, const std::vector<SweepCellResult>& cells);

inline constexpr const char* kSweepCsvHeader =
    "max_trade_fraction,min_weight,max_weight_change,z_norm,found,restarts,oracle_failures,wall_time_s";

std::string format_number(double x);
std::string sweep_csv(const SweepResult& result);
Json sweep_metadata(const SweepConfig& config, const SweepResult& result);

// Writes the CSV and its `.json` sidecar, each replaced atomically.
void write_sweep_outputs(const SweepConfig& config, const SweepResult& result);

// Writes `contents` to a temporary file beside `path`, then renames it over `path`.
void write_file_atomically(const std::filesystem::path& path, const std::string& contents);

// Inclusive grid lo, lo + step, ..., hi.
std::vector<double> stepped_grid(double lo, double hi, double step);

std::string safe_region_csv(const SafeRegion<double>& region);
void emit_safe_region(std::vector<double> w_grid, std::vector<double> dw_grid, double gamma, double cap,
                      const std::filesystem::path& output);

}  // namespace tfmm
