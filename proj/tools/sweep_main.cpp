// sweep: guardrail sweeps, safe-region grids and single attack evaluations.
#include <exception>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "tfmm/attack.hpp"
#include "tfmm/json_io.hpp"
#include "tfmm/sweep.hpp"

namespace {

constexpr int kConfigErrorExit = 2;

int run_command(const std::string& config_path, int threads_flag) {
  tfmm::SweepConfig config;
  try {
    config = tfmm::load_sweep_config(config_path);
  } catch (const tfmm::ConfigError& e) {
    std::cerr << "config error in " << config_path << ": " << e.what() << "\n";
    return kConfigErrorExit;
  }
  const int threads = tfmm::resolve_threads(threads_flag > 0 ? threads_flag : config.parallelism);
  const auto result = tfmm::run_sweep(config, threads);
  tfmm::write_sweep_outputs(config, result);
  const auto found = std::count_if(result.cells.begin(), result.cells.end(), [](const auto& c) { return c.found; });
  std::cout << "wrote " << config.output.string() << ": " << result.cells.size() << " cells, " << found
            << " with an attack, " << result.frontier_violations.size() << " frontier violations, "
            << result.wall_time_s << " s on " << threads << " threads\n";
  return 0;
}

int safe_region_command(double gamma, double cap, const std::string& out, double w_min, double w_max,
                        double w_step, double dw_min, double dw_max, double dw_step) {
  tfmm::emit_safe_region(tfmm::stepped_grid(w_min, w_max, w_step), tfmm::stepped_grid(dw_min, dw_max, dw_step),
                         gamma, cap, out);
  std::cout << "wrote " << out << "\n";
  return 0;
}

int attack_command(const std::string& scenario_arg) {
  std::string text;
  if (scenario_arg == "-") {
    text.assign(std::istreambuf_iterator<char>(std::cin), {});
  } else {
    std::ifstream in(scenario_arg);
    if (!in) {
      // Not a readable file: treat the argument as inline JSON.
      text = scenario_arg;
    } else {
      text.assign(std::istreambuf_iterator<char>(in), {});
    }
  }
  const auto scenario = tfmm::scenario_from_json(tfmm::Json::parse(text));
  const auto outcome = tfmm::run_pair_attack(scenario);
  std::cout << tfmm::to_json(outcome, scenario).dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TFMM attack model: guardrail sweeps, safe regions and single attacks"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a guardrail sweep from a config file");
  std::string config_path;
  int threads = 0;
  run->add_option("--config", config_path, "Sweep config file")->required();
  run->add_option("--threads", threads, "Worker threads (overridden by TFMM_GUARD_THREADS)");

  auto* region = app.add_subcommand("safe-region", "Write the two-token safe region CSV");
  double gamma = 0.997, cap = 0.2;
  std::string out;
  double w_min = 0.05, w_max = 0.95, w_step = 0.005, dw_min = -0.02, dw_max = 0.02, dw_step = 1e-4;
  region->add_option("--gamma", gamma, "Fee parameter gamma")->required();
  region->add_option("--cap", cap, "Trade-fraction cap")->required();
  region->add_option("--out", out, "Output CSV")->required();
  region->add_option("--w-min", w_min, "Smallest weight")->capture_default_str();
  region->add_option("--w-max", w_max, "Largest weight")->capture_default_str();
  region->add_option("--w-step", w_step, "Weight step")->capture_default_str();
  region->add_option("--dw-min", dw_min, "Smallest weight change")->capture_default_str();
  region->add_option("--dw-max", dw_max, "Largest weight change")->capture_default_str();
  region->add_option("--dw-step", dw_step, "Weight-change step")->capture_default_str();

  auto* attack = app.add_subcommand("attack", "Evaluate one pair attack and print the outcome as JSON");
  std::string scenario;
  attack->add_option("--scenario", scenario, "Scenario JSON file, '-' for stdin, or inline JSON")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return run_command(config_path, threads);
    if (*region) return safe_region_command(gamma, cap, out, w_min, w_max, w_step, dw_min, dw_max, dw_step);
    if (*attack) return attack_command(scenario);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
