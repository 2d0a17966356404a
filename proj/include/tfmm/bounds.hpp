// Guardrail analytics: epsilon-derivatives of the manipulation trade, the
// sufficient conditions under which no pair attack can profit, and the
// two-token safe region in (w, dw).
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "tfmm/pool.hpp"

namespace tfmm {

// dDelta1/depsilon at a point (delta1 solving the inflow equation).
template <typename Scalar>
Scalar ddelta1_depsilon(Scalar r1, Scalar w1, Scalar w2, Scalar gamma, Scalar delta1) {
  using std::pow;
  const Scalar x = delta1 / r1;
  const Scalar grown = Scalar(1) + gamma * x;
  const Scalar denom = (Scalar(1) + gamma * (w1 / w2) * (Scalar(1) + x) / grown) * pow(grown, w1 / w2);
  return gamma * gamma * r1 / denom;
}

// dDelta2/depsilon at a point (delta2 solving the outflow equation).
template <typename Scalar>
Scalar ddelta2_depsilon(Scalar r2, Scalar w1, Scalar w2, Scalar gamma, Scalar delta2) {
  using std::pow;
  const Scalar left = Scalar(1) - delta2 / r2;
  const Scalar denom = (Scalar(1) + w2 / w1) * pow(left, -w2 / w1) - (Scalar(1) - gamma);
  return gamma * gamma * gamma * r2 * left * left / denom;
}

template <typename Scalar>
struct GradientConditions {
  bool cond_a;       // d(Delta1' - Delta1)/depsilon <= 0
  bool cond_b;       // d(Delta2 - Delta2')/depsilon <= 0
  Scalar lhs_a;      // must be <= 1
  Scalar lhs_b;      // w1'/(w1'+w2'), must be >= rhs_b
  Scalar rhs_b;

  bool safe() const { return cond_a && cond_b; }
};

// Sufficient conditions for the pumped-token-2 attack to be unprofitable for
// trades up to the given fractions. Only weight ratios of the traded pair
// enter, so this applies to any pair inside a larger pool. Inequalities are
// inclusive to 1e-12 relative.
template <typename Scalar>
GradientConditions<Scalar> gradient_conditions_n(Scalar w1, Scalar w2, Scalar w1p, Scalar w2p, Scalar gamma,
                                                 Scalar delta1_over_r1, Scalar delta2_over_r2) {
  using std::pow;
  const Scalar tol = Scalar(1e-12);
  const Scalar x = delta1_over_r1;
  const Scalar lhs_a =
      (w2p / (w1p + w2p)) * (Scalar(1) + gamma * (w1 / w2) * (Scalar(1) + x) / (Scalar(1) + gamma * x));
  const Scalar f = (Scalar(1) - gamma) * pow(Scalar(1) - delta2_over_r2, w2 / w1);
  const Scalar rhs_b = (Scalar(1) - f) / (Scalar(1) + w2 / w1 - f);
  const Scalar lhs_b = w1p / (w1p + w2p);
  return {lhs_a <= Scalar(1) + tol, lhs_b >= rhs_b * (Scalar(1) - tol), lhs_a, lhs_b, rhs_b};
}

// Two-token weight-change bounds on dw = dw1 = -dw2 at w = w1:
//   lb_a26, lb_a27 from the pumped-token-2 attack,
//   ub_a28, ub_a29 from the mirror attack.
// Written in rearranged closed forms that are exactly zero at gamma = 1.
template <typename Scalar>
struct TwoTokenBounds {
  Scalar lb_a26;
  Scalar lb_a27;
  Scalar ub_a28;
  Scalar ub_a29;

  Scalar lower() const { return std::max(lb_a26, lb_a27); }
  Scalar upper() const { return std::min(ub_a28, ub_a29); }
  bool contains(Scalar dw) const { return dw >= lower() && dw <= upper(); }
};

template <typename Scalar>
TwoTokenBounds<Scalar> two_token_bounds(Scalar w, Scalar gamma, Scalar d1_frac, Scalar d2_frac) {
  using std::pow;
  const Scalar v = Scalar(1) - w;
  const Scalar fee = Scalar(1) - gamma;
  // Pumped token 2: token 1 flows in (d1), token 2 flows out (d2).
  const Scalar q1 = (Scalar(1) + d1_frac) / (Scalar(1) + gamma * d1_frac);
  const Scalar lb26 = -w * v * fee / ((Scalar(1) + gamma * d1_frac) * (v + gamma * q1 * w));
  const Scalar f2 = fee * pow(Scalar(1) - d2_frac, v / w);
  const Scalar lb27 = -v * f2 / (Scalar(1) + v / w - f2);
  // Mirror: token 2 flows in (d2), token 1 flows out (d1).
  const Scalar q2 = (Scalar(1) + d2_frac) / (Scalar(1) + gamma * d2_frac);
  const Scalar ub28 = w * v * fee / ((Scalar(1) + gamma * d2_frac) * (w + gamma * q2 * v));
  const Scalar f1 = fee * pow(Scalar(1) - d1_frac, w / v);
  const Scalar ub29 = w * f1 / (Scalar(1) + w / v - f1);
  return {lb26, lb27, ub28, ub29};
}

enum class BindingConstraint { none, a26, a27, a28, a29 };

inline std::string_view to_string(BindingConstraint b) {
  switch (b) {
    case BindingConstraint::none: return "none";
    case BindingConstraint::a26: return "A26";
    case BindingConstraint::a27: return "A27";
    case BindingConstraint::a28: return "A28";
    case BindingConstraint::a29: return "A29";
  }
  return "none";
}

// For an unsafe dw, the inequality with the largest violation; none when safe.
template <typename Scalar>
BindingConstraint binding_constraint(const TwoTokenBounds<Scalar>& b, Scalar dw) {
  const std::array<Scalar, 4> violation{b.lb_a26 - dw, b.lb_a27 - dw, dw - b.ub_a28, dw - b.ub_a29};
  const auto worst = std::max_element(violation.begin(), violation.end());
  if (*worst <= Scalar(0)) return BindingConstraint::none;
  return static_cast<BindingConstraint>(1 + (worst - violation.begin()));
}

template <typename Scalar>
struct SafeRegion {
  std::vector<Scalar> w_grid;
  std::vector<Scalar> dw_grid;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> safe;  // rows: w, cols: dw
  std::vector<BindingConstraint> binding;                  // row-major, same shape

  BindingConstraint binding_at(Eigen::Index row, Eigen::Index col) const {
    return binding[static_cast<std::size_t>(row * safe.cols() + col)];
  }
};

// Evaluates all four bounds with both trade fractions at the cap.
template <typename Scalar>
SafeRegion<Scalar> safe_region(std::vector<Scalar> w_grid, std::vector<Scalar> dw_grid, Scalar gamma,
                               Scalar max_trade_fraction) {
  detail::require(std::is_sorted(w_grid.begin(), w_grid.end()), "w grid must be ascending");
  detail::require(std::is_sorted(dw_grid.begin(), dw_grid.end()), "dw grid must be ascending");
  SafeRegion<Scalar> region;
  const auto rows = static_cast<Eigen::Index>(w_grid.size());
  const auto cols = static_cast<Eigen::Index>(dw_grid.size());
  region.safe.resize(rows, cols);
  region.binding.resize(static_cast<std::size_t>(rows * cols));
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto b = two_token_bounds(w_grid[i], gamma, max_trade_fraction, max_trade_fraction);
    for (Eigen::Index j = 0; j < cols; ++j) {
      const auto bind = binding_constraint(b, dw_grid[j]);
      region.safe(i, j) = bind == BindingConstraint::none;
      region.binding[static_cast<std::size_t>(i * cols + j)] = bind;
    }
  }
  region.w_grid = std::move(w_grid);
  region.dw_grid = std::move(dw_grid);
  return region;
}

// Largest |dw| that is safe in both directions at weight w.
template <typename Scalar>
Scalar safe_half_width(Scalar w, Scalar gamma, Scalar max_trade_fraction) {
  const auto b = two_token_bounds(w, gamma, max_trade_fraction, max_trade_fraction);
  return std::max(Scalar(0), std::min(-b.lower(), b.upper()));
}

// The three protection parameters.
struct Guardrails {
  double max_trade_fraction = 0.2;
  double min_weight = 0.05;
  double max_weight_change = 0.001;

  void validate(int n_tokens) const {
    detail::require(max_trade_fraction > 0 && max_trade_fraction < 1, "max_trade_fraction must lie in (0, 1)");
    detail::require(min_weight >= kMinWeight && min_weight * n_tokens < 1,
                    "min_weight must lie in (0, 1/N)");
    detail::require(max_weight_change >= 0 && max_weight_change < 1, "max_weight_change must lie in [0, 1)");
  }
};

enum class Rail { trade_size, min_weight, weight_change };

inline std::string_view to_string(Rail r) {
  switch (r) {
    case Rail::trade_size: return "max-trade-fraction";
    case Rail::min_weight: return "min-weight";
    case Rail::weight_change: return "max-weight-change";
  }
  return "unknown";
}

struct GuardrailViolation {
  Rail rail;
  int token;
  double value;
  double limit;
};

struct GuardrailCheck {
  std::vector<GuardrailViolation> violations;

  bool accepted() const { return violations.empty(); }
};

// Limits are inclusive to 1e-12 relative.
template <typename Scalar>
GuardrailCheck check_guardrails(const PoolState<Scalar>& pool, const TradeIntent<Scalar>& trade,
                                const TokenVector<Scalar>& weight_update, const Guardrails& g) {
  constexpr double slack = 1e-12;
  GuardrailCheck check;
  const int n = pool.size();
  detail::require(trade.delta_in.size() == n && trade.lambda_out.size() == n && weight_update.size() == n,
                  "guardrail inputs differ in size");
  for (int k = 0; k < n; ++k) {
    const double r = static_cast<double>(pool.reserves()[k]);
    const double cap = g.max_trade_fraction * r * (1 + slack);
    const double in = static_cast<double>(trade.delta_in[k]);
    const double out = static_cast<double>(trade.lambda_out[k]);
    if (in > cap) check.violations.push_back({Rail::trade_size, k, in / r, g.max_trade_fraction});
    if (out > cap) check.violations.push_back({Rail::trade_size, k, out / r, g.max_trade_fraction});
    const double dw = static_cast<double>(weight_update[k]);
    if (std::abs(dw) > g.max_weight_change * (1 + slack))
      check.violations.push_back({Rail::weight_change, k, dw, g.max_weight_change});
    const double after = static_cast<double>(pool.weights()[k]) + dw;
    if (after < g.min_weight * (1 - slack)) check.violations.push_back({Rail::min_weight, k, after, g.min_weight});
  }
  return check;
}

}  // namespace tfmm
