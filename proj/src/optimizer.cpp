#include "tfmm/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "tfmm/arbitrage.hpp"
#include "tfmm/roots.hpp"

namespace tfmm {
namespace {

constexpr double kLogitLimit = 30.0;
constexpr double kLogReserveLimit = 27.0;
constexpr double kImprovementTolerance = 1e-14;

double clamp_unit(double x) { return std::clamp(x, -1.0, 1.0); }

// Uniform on [0, 1) from the top 53 bits; independent of the standard
// library's distribution implementations.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Scales inflows (or outflows, whichever side is too large) so the trade
// meets the trading function with equality: sum w ln(1 + gamma f+) + sum w ln(1 - f-) = 0.
void balance_fractions(TokenVectord& f, const TokenVectord& w, double gamma) {
  const int n = static_cast<int>(f.size());
  auto log_in = [&](double t) {
    double acc = 0;
    for (int k = 0; k < n; ++k)
      if (f[k] > 0) acc += w[k] * std::log1p(gamma * t * f[k]);
    return acc;
  };
  auto log_out = [&](double s) {
    double acc = 0;
    for (int k = 0; k < n; ++k)
      if (f[k] < 0) acc += w[k] * std::log1p(s * f[k]);
    return acc;
  };
  const double in = log_in(1.0);
  const double out = log_out(1.0);
  const double total = in + out;
  if (total > 0) {
    double t = 0;
    if (out < 0) {
      auto fn = [&](double x) { return log_in(x) + out; };
      auto dfn = [&](double x) {
        double acc = 0;
        for (int k = 0; k < n; ++k)
          if (f[k] > 0) acc += w[k] * gamma * f[k] / (1 + gamma * x * f[k]);
        return acc;
      };
      t = detail::newton_increasing(fn, dfn, 0.0, 1.0, -out / in);
    }
    for (int k = 0; k < n; ++k)
      if (f[k] > 0) f[k] *= t;
  } else if (total < 0) {
    double s = 0;
    if (in > 0) {
      auto fn = [&](double x) { return -log_out(x) - in; };
      auto dfn = [&](double x) {
        double acc = 0;
        for (int k = 0; k < n; ++k)
          if (f[k] < 0) acc -= w[k] * f[k] / (1 + x * f[k]);
        return acc;
      };
      s = detail::newton_increasing(fn, dfn, 0.0, 1.0, in / -out);
    }
    for (int k = 0; k < n; ++k)
      if (f[k] < 0) f[k] *= s;
  }
}

struct Evaluation {
  double z_norm;
  double z_bound_norm;
  double pool_value;
  bool converged;
};

Evaluation evaluate(const AttackPlan& plan, bool with_bound) {
  const auto& pool = plan.pool;
  const auto& p = plan.market.prices();
  const TokenVectord net_in = plan.trade.delta_in - plan.trade.lambda_out;
  const double v0 = pool.reserves().dot(p);
  const double cost = net_in.dot(p);
  const TokenVectord attacked_reserves = pool.reserves() + net_in;
  const TokenVectord new_weights = pool.weights() + plan.weight_update;

  auto z_with = [&](double gamma, bool& ok) {
    const PoolStated attacked(attacked_reserves, new_weights, gamma);
    const PoolStated untouched(pool.reserves(), new_weights, gamma);
    const auto arb = arb_fee_aware_ntoken(attacked, plan.market);
    const auto null = arb_fee_aware_ntoken(untouched, plan.market);
    ok = ok && arb.converged && null.converged;
    return (arb.profit - cost - null.profit) / v0;
  };
  bool ok = true;
  Evaluation e{};
  e.pool_value = v0;
  e.z_norm = z_with(pool.gamma(), ok);
  e.z_bound_norm = with_bound ? z_with(1.0, ok) : std::numeric_limits<double>::quiet_NaN();
  e.converged = ok && std::isfinite(e.z_norm);
  return e;
}

double objective_at(const AttackParameterization& param, const Eigen::VectorXd& theta) {
  try {
    return objective(param.decode(theta));
  } catch (const std::exception&) {
    return -std::numeric_limits<double>::infinity();
  }
}

bool is_box_coordinate(const AttackParameterization& param, int i) {
  return i >= param.offset(AttackParameterization::band);
}

Eigen::VectorXd gradient_impl(const AttackParameterization& param, const Eigen::VectorXd& theta, double f0,
                              const std::vector<bool>& mask, double rel_step) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd probe = theta;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    const double x = theta[i];
    const double h = rel_step * std::max(1.0, std::abs(x));
    const bool box = is_box_coordinate(param, static_cast<int>(i));
    const bool up_ok = !box || x + h <= 1.0;
    const bool down_ok = !box || x - h >= -1.0;
    double f_up = f0, f_down = f0, span = 0;
    if (up_ok) {
      probe[i] = x + h;
      f_up = objective_at(param, probe);
      span += h;
    }
    if (down_ok) {
      probe[i] = x - h;
      f_down = objective_at(param, probe);
      span += h;
    }
    probe[i] = x;
    g[i] = (f_up - f_down) / span;
  }
  return g;
}

}  // namespace

PlanValue evaluate_plan(const AttackPlan& plan) {
  const auto e = evaluate(plan, true);
  return {e.z_norm, e.z_bound_norm, e.pool_value, e.converged};
}

double objective(const AttackPlan& plan) {
  const auto e = evaluate(plan, false);
  return e.converged ? e.z_norm : -std::numeric_limits<double>::infinity();
}

void SearchSpec::validate() const {
  detail::require(n_tokens >= 2 && n_tokens <= kMaxTokens, "n_tokens must lie in [2, 16]");
  guardrails.validate(n_tokens);
  detail::require(gamma > 0 && gamma <= 1, "gamma must lie in (0, 1]");
  detail::require(n_restarts >= 1, "n_restarts must be at least 1");
  detail::require(max_iters >= 0, "max_iters must be non-negative");
  detail::require(schedule.learning_rate > 0, "learning_rate must be positive");
  detail::require(schedule.final_rate_fraction > 0 && schedule.final_rate_fraction <= 1,
                  "final_rate_fraction must lie in (0, 1]");
  detail::require(schedule.beta1 >= 0 && schedule.beta1 < 1, "beta1 must lie in [0, 1)");
  detail::require(schedule.beta2 >= 0 && schedule.beta2 < 1, "beta2 must lie in [0, 1)");
  detail::require(schedule.adam_epsilon > 0, "adam_epsilon must be positive");
  detail::require(schedule.patience >= 1, "patience must be at least 1");
  detail::require(schedule.fd_step > 0 && schedule.fd_step < 1e-2, "fd_step must lie in (0, 1e-2)");
}

AttackParameterization::AttackParameterization(int n_tokens, Guardrails guardrails, double gamma)
    : n_(n_tokens), g_(guardrails), gamma_(gamma) {
  detail::require(n_ >= 2 && n_ <= kMaxTokens, "n_tokens must lie in [2, 16]");
  g_.validate(n_);
  detail::require(gamma_ > 0 && gamma_ <= 1, "gamma must lie in (0, 1]");
}

AttackPlan AttackParameterization::decode(const Eigen::VectorXd& theta) const {
  detail::require(theta.size() == dimension(), "free vector has the wrong dimension");
  const int n = n_;
  const double m = g_.min_weight;

  const auto logits = theta.segment(offset(weights), n).cwiseMax(-kLogitLimit).cwiseMin(kLogitLimit);
  TokenVectord e = (logits.array() - logits.maxCoeff()).exp().matrix();
  TokenVectord w = (m + (1 - n * m) * (e / e.sum()).array()).matrix();

  TokenVectord r =
      theta.segment(offset(reserves), n).cwiseMax(-kLogReserveLimit).cwiseMin(kLogReserveLimit).array().exp().matrix();
  PoolStated pool(std::move(r), w, gamma_);

  // Market: every token's market / spot ratio lies in [1, 1/gamma].
  const double span = -std::log(gamma_);
  TokenVectord log_ratio(n);
  for (int k = 0; k < n; ++k) log_ratio[k] = (clamp_unit(theta[offset(band) + k]) + 1) / 2 * span;
  TokenVectord prices(n);
  prices[0] = 1.0;
  for (int k = 1; k < n; ++k) prices[k] = spot_price(pool, k, 0) * std::exp(log_ratio[k] - log_ratio[0]);
  MarketPricesd market(std::move(prices));

  // Weight update: box [-min(cap, w - m), cap], then the larger side shrinks to a zero sum.
  const double cap = g_.max_weight_change;
  TokenVectord dw(n);
  double up = 0, down = 0;
  for (int k = 0; k < n; ++k) {
    const double t = clamp_unit(theta[offset(update) + k]);
    dw[k] = t >= 0 ? t * cap : t * std::min(cap, std::max(0.0, w[k] - m));
    (dw[k] > 0 ? up : down) += std::abs(dw[k]);
  }
  if (up > down) {
    for (int k = 0; k < n; ++k)
      if (dw[k] > 0) dw[k] *= down / up;
  } else if (down > up) {
    for (int k = 0; k < n; ++k)
      if (dw[k] < 0) dw[k] *= up / down;
  }

  // Manipulation trade as signed reserve fractions, balanced onto the invariant.
  TokenVectord f(n);
  for (int k = 0; k < n; ++k) f[k] = g_.max_trade_fraction * clamp_unit(theta[offset(trade) + k]);
  balance_fractions(f, w, gamma_);
  auto intent = TradeIntentd::zero(n);
  for (int k = 0; k < n; ++k) {
    if (f[k] > 0) intent.delta_in[k] = f[k] * pool.reserves()[k];
    if (f[k] < 0) intent.lambda_out[k] = -f[k] * pool.reserves()[k];
  }
  return {std::move(pool), std::move(market), std::move(intent), std::move(dw)};
}

void AttackParameterization::project(Eigen::VectorXd& theta) const {
  detail::require(theta.size() == dimension(), "free vector has the wrong dimension");
  theta.segment(offset(weights), n_) = theta.segment(offset(weights), n_).cwiseMax(-kLogitLimit).cwiseMin(kLogitLimit);
  theta.segment(offset(reserves), n_) =
      theta.segment(offset(reserves), n_).cwiseMax(-kLogReserveLimit).cwiseMin(kLogReserveLimit);
  theta.tail(3 * n_) = theta.tail(3 * n_).cwiseMax(-1.0).cwiseMin(1.0);
}

std::vector<bool> AttackParameterization::default_mask() const {
  std::vector<bool> mask(static_cast<std::size_t>(dimension()), true);
  for (int k = 0; k < n_; ++k) mask[static_cast<std::size_t>(offset(reserves) + k)] = false;
  return mask;
}

Eigen::VectorXd AttackParameterization::initial(std::mt19937_64& rng) const {
  Eigen::VectorXd theta(dimension());
  // Dirichlet(1) = normalised Exp(1) draws; the softmax of their logs recovers them.
  for (int k = 0; k < n_; ++k) theta[offset(weights) + k] = std::log(-std::log1p(-uniform01(rng)) + 1e-300);
  for (int k = 0; k < n_; ++k) theta[offset(reserves) + k] = uniform01(rng) * std::log(1e4);
  for (int k = 0; k < n_; ++k) theta[offset(band) + k] = 2 * uniform01(rng) - 1;
  for (int k = 0; k < n_; ++k) theta[offset(update) + k] = 2 * uniform01(rng) - 1;
  theta.segment(offset(trade), n_).setZero();
  const int in = static_cast<int>(rng() % static_cast<std::uint64_t>(n_));
  const int out = (in + 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(n_ - 1))) % n_;
  theta[offset(trade) + in] = std::exp(std::log(1e-5) * (1 - uniform01(rng)));
  theta[offset(trade) + out] = -1.0;
  project(theta);
  return theta;
}

Eigen::VectorXd numerical_gradient(const AttackParameterization& param, const Eigen::VectorXd& theta,
                                   const std::vector<bool>& mask, double rel_step) {
  detail::require(mask.size() == static_cast<std::size_t>(theta.size()), "mask has the wrong length");
  return gradient_impl(param, theta, objective_at(param, theta), mask, rel_step);
}

RestartResult optimize_from(const AttackParameterization& param, const StepSchedule& schedule, int max_iters,
                            Eigen::VectorXd theta, const std::vector<bool>& mask) {
  detail::require(mask.size() == static_cast<std::size_t>(theta.size()), "mask has the wrong length");
  param.project(theta);
  RestartResult result;
  double f = objective_at(param, theta);
  result.theta = theta;
  if (!std::isfinite(f)) return result;
  result.z_norm = f;
  result.failed = false;

  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(theta.size());
  double b1 = 1, b2 = 1;
  int stall = 0;
  for (int it = 0; it < max_iters; ++it) {
    const Eigen::VectorXd g = gradient_impl(param, theta, f, mask, schedule.fd_step);
    if (!g.allFinite()) break;
    const double progress = static_cast<double>(it) / std::max(1, max_iters);
    const double rate = schedule.learning_rate *
                        (schedule.final_rate_fraction +
                         (1 - schedule.final_rate_fraction) * 0.5 * (1 + std::cos(std::numbers::pi * progress)));
    b1 *= schedule.beta1;
    b2 *= schedule.beta2;
    m1 = schedule.beta1 * m1 + (1 - schedule.beta1) * g;
    m2 = schedule.beta2 * m2 + (1 - schedule.beta2) * g.cwiseProduct(g);
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      if (!mask[static_cast<std::size_t>(i)]) continue;
      const double mhat = m1[i] / (1 - b1);
      const double vhat = m2[i] / (1 - b2);
      theta[i] += rate * mhat / (std::sqrt(vhat) + schedule.adam_epsilon);
    }
    param.project(theta);
    f = objective_at(param, theta);
    result.iterations = it + 1;
    if (!std::isfinite(f)) break;
    if (f > result.z_norm + kImprovementTolerance)
      stall = 0;
    else if (++stall >= schedule.patience)
      break;
    if (f > result.z_norm) {
      result.z_norm = f;
      result.theta = theta;
    }
  }
  return result;
}

std::uint64_t restart_seed(std::uint64_t master_seed, std::uint64_t cell_index, std::uint64_t restart) {
  return splitmix64(splitmix64(splitmix64(master_seed) ^ cell_index) ^ restart);
}

RestartResult run_restart(const SearchSpec& spec, int restart) {
  const AttackParameterization param(spec.n_tokens, spec.guardrails, spec.gamma);
  std::mt19937_64 rng(restart_seed(spec.master_seed, spec.cell_index, static_cast<std::uint64_t>(restart)));
  return optimize_from(param, spec.schedule, spec.max_iters, param.initial(rng), param.default_mask());
}

BestAttack reduce_restarts(const SearchSpec& spec, const std::vector<RestartResult>& restarts) {
  BestAttack best;
  best.restarts_used = static_cast<int>(restarts.size());
  for (std::size_t r = 0; r < restarts.size(); ++r) {
    if (restarts[r].failed) {
      ++best.oracle_failures;
      continue;
    }
    if (best.best_restart < 0 || restarts[r].z_norm > best.z_norm) {
      best.z_norm = restarts[r].z_norm;
      best.best_restart = static_cast<int>(r);
      best.theta = restarts[r].theta;
    }
  }
  best.found = best.z_norm > kFoundThreshold;
  if (best.best_restart >= 0) {
    const AttackParameterization param(spec.n_tokens, spec.guardrails, spec.gamma);
    best.z_bound_norm = evaluate_plan(param.decode(best.theta)).z_bound_norm;
  }
  return best;
}

BestAttack search_cell(const SearchSpec& spec, int threads) {
  spec.validate();
  std::vector<RestartResult> results(static_cast<std::size_t>(spec.n_restarts));
  parallel_for(results.size(), threads, [&](std::size_t r) { results[r] = run_restart(spec, static_cast<int>(r)); });
  return reduce_restarts(spec, results);
}

}  // namespace tfmm
