// Adversarial attack search for one guardrail setting.
//
// An attack plan is a pre-attack pool, the market prices, a general N-token
// manipulation trade and a weight update. A free vector maps smoothly onto
// plans that satisfy every guardrail, the trading function at equality and
// the pre-attack no-arbitrage condition, so the ascent never leaves the
// feasible set. Restarts from random initialisations are reduced to the best
// attack deterministically.
#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "tfmm/bounds.hpp"
#include "tfmm/parallel.hpp"
#include "tfmm/pool.hpp"

namespace tfmm {

struct AttackPlan {
  PoolStated pool;
  MarketPricesd market;
  TradeIntentd trade;          // manipulation trade, before the weight update
  TokenVectord weight_update;  // applied between the two blocks
};

// Attack value scaled by the pre-attack pool value V0 = p . R.
struct PlanValue {
  double z_norm;        // fee-aware arbitrage for both the attack and the counterfactual
  double z_bound_norm;  // the same with fee-free arbitrage
  double pool_value;
  bool converged;
};

// Full evaluation, both the fee-aware value and its fee-free bound.
PlanValue evaluate_plan(const AttackPlan& plan);

// Fee-aware Z / V0, or -infinity when the arbitrage oracle fails.
double objective(const AttackPlan& plan);

inline constexpr double kFoundThreshold = 1e-9;

// Adaptive-step ascent settings.
struct StepSchedule {
  double learning_rate = 0.05;
  double final_rate_fraction = 0.1;  // cosine decay to this fraction of the rate
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-12;
  int patience = 60;        // iterations without improvement before stopping
  double fd_step = 1e-6;    // relative central-difference step
};

struct SearchSpec {
  int n_tokens = 3;
  Guardrails guardrails;
  double gamma = 0.997;
  int n_restarts = 256;
  int max_iters = 300;
  StepSchedule schedule;
  std::uint64_t master_seed = 0;
  std::uint64_t cell_index = 0;

  void validate() const;
};

// Maps the free vector onto feasible attack plans. Blocks of N coordinates:
//   weights   w = m + (1 - N m) softmax(theta)
//   reserves  R = exp(theta)
//   band      market / spot ratios exp((theta + 1)/2 * ln(1/gamma)), theta in [-1, 1]
//   update    dw in the box of the weight-change cap and the floor, rebalanced to sum to zero
//   trade     signed trade fractions cap * theta, theta in [-1, 1], scaled onto the invariant
// Z / V0 is invariant under a change of token units (R_k -> c_k R_k,
// p_k -> p_k / c_k), so the reserve block is a pure symmetry direction and
// is frozen by default_mask().
class AttackParameterization {
 public:
  enum Block { weights = 0, reserves = 1, band = 2, update = 3, trade = 4 };

  AttackParameterization(int n_tokens, Guardrails guardrails, double gamma);

  int n_tokens() const { return n_; }
  int dimension() const { return 5 * n_; }
  int offset(Block b) const { return static_cast<int>(b) * n_; }

  AttackPlan decode(const Eigen::VectorXd& theta) const;

  // Clamps every coordinate into its box.
  void project(Eigen::VectorXd& theta) const;

  // True for coordinates the ascent moves.
  std::vector<bool> default_mask() const;

  // Random start: Dirichlet(1) weights, log-uniform reserves on [1, 1e4],
  // uniform band position and weight update, and a pair trade whose inflow
  // fraction is the cap times a log-uniform factor on [1e-5, 1].
  Eigen::VectorXd initial(std::mt19937_64& rng) const;

 private:
  int n_;
  Guardrails g_;
  double gamma_;
};

struct RestartResult {
  double z_norm = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd theta;
  int iterations = 0;
  bool failed = true;  // objective never finite
};

// Gradient ascent from theta0 over the coordinates enabled in mask.
RestartResult optimize_from(const AttackParameterization& param, const StepSchedule& schedule, int max_iters,
                            Eigen::VectorXd theta0, const std::vector<bool>& mask);

// Central-difference gradient of the objective over the enabled coordinates.
Eigen::VectorXd numerical_gradient(const AttackParameterization& param, const Eigen::VectorXd& theta,
                                   const std::vector<bool>& mask, double rel_step);

// Seed of one restart; a pure function of its three inputs.
std::uint64_t restart_seed(std::uint64_t master_seed, std::uint64_t cell_index, std::uint64_t restart);

// One full restart of a cell: random start, then ascent.
RestartResult run_restart(const SearchSpec& spec, int restart);

struct BestAttack {
  double z_norm = -std::numeric_limits<double>::infinity();
  double z_bound_norm = -std::numeric_limits<double>::infinity();
  bool found = false;
  int restarts_used = 0;
  int best_restart = -1;
  int oracle_failures = 0;
  Eigen::VectorXd theta;

  AttackPlan plan(const AttackParameterization& param) const { return param.decode(theta); }
};

// Max by z_norm, ties to the lowest restart index.
BestAttack reduce_restarts(const SearchSpec& spec, const std::vector<RestartResult>& restarts);

// Runs all restarts, spread over `threads` workers. The result does not
// depend on the thread count.
BestAttack search_cell(const SearchSpec& spec, int threads = 1);

}  // namespace tfmm
