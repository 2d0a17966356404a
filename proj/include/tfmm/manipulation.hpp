// First attack stage: the pair trade that pushes the pool's fee-adjusted
// quote of a token to (1 + epsilon) times its market price.
//
// Convention: token 1 is paid in (fraction x = Delta1/R1), token 2 is taken
// out (fraction y = Delta2/R2). When the pool starts at the worst case of the
// no-arbitrage band the manipulated state satisfies
//   (1 + x)(1 + gamma x)^(w1/w2) = gamma^2 (1 + epsilon)
//   (1 - y)^-1 (1 + ((1 - y)^(-w2/w1) - 1) / gamma) = gamma^2 (1 + epsilon)
// Both left-hand sides equal 1 at zero trade and are strictly increasing.
#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

#include "tfmm/roots.hpp"

namespace tfmm {

// Quote deviation already present at the worst-case pre-attack state:
// gamma^-2 - 1. Zero without fees.
template <typename Scalar>
Scalar epsilon_null(Scalar gamma) {
  if (!(gamma > Scalar(0) && gamma <= Scalar(1))) throw std::invalid_argument("gamma must lie in (0, 1]");
  return Scalar(1) / (gamma * gamma) - Scalar(1);
}

// Left-hand sides of the two implicit equations, as functions of the trade fractions.
template <typename Scalar>
Scalar inflow_lhs(Scalar x, Scalar w_in, Scalar w_out, Scalar gamma) {
  using std::exp;
  using std::log1p;
  return exp(log1p(x) + (w_in / w_out) * log1p(gamma * x));
}

template <typename Scalar>
Scalar outflow_lhs(Scalar y, Scalar w_in, Scalar w_out, Scalar gamma) {
  using std::exp;
  using std::expm1;
  using std::log;
  using std::log1p;
  const Scalar grow = expm1(-(w_out / w_in) * log1p(-y));  // (1-y)^(-w_out/w_in) - 1
  return exp(-log1p(-y) + log1p(grow / gamma));
}

namespace detail {

// Targets within this distance of 1 are the null manipulation.
template <typename Scalar>
constexpr Scalar null_target_slack() {
  return Scalar(8) * std::numeric_limits<Scalar>::epsilon();
}

template <typename Scalar>
bool is_null_target(Scalar target) {
  if (!(target >= Scalar(1) - null_target_slack<Scalar>()))
    throw std::domain_error("no root: requested quote deviation is below the null value");
  return target <= Scalar(1);
}

}  // namespace detail

// Inflow fraction x >= 0 solving (1 + x)(1 + gamma x)^(w_in/w_out) = target.
template <typename Scalar>
Scalar manipulation_inflow_fraction(Scalar target, Scalar w_in, Scalar w_out, Scalar gamma) {
  using std::log;
  using std::log1p;
  if (detail::is_null_target(target)) return Scalar(0);
  const Scalar log_target = log(target);
  const Scalar ratio = w_in / w_out;
  auto f = [&](Scalar x) { return log1p(x) + ratio * log1p(gamma * x) - log_target; };
  const Scalar hi = detail::bracket_above(f, Scalar(1));
  return detail::bisect_increasing(f, Scalar(0), hi);
}

// Outflow fraction y in [0, 1) solving the second implicit equation.
template <typename Scalar>
Scalar manipulation_outflow_fraction(Scalar target, Scalar w_in, Scalar w_out, Scalar gamma) {
  using std::expm1;
  using std::log;
  using std::log1p;
  if (detail::is_null_target(target)) return Scalar(0);
  const Scalar log_target = log(target);
  const Scalar ratio = w_out / w_in;
  auto f = [&](Scalar y) {
    const Scalar grow = expm1(-ratio * log1p(-y));
    return -log1p(-y) + log1p(grow / gamma) - log_target;
  };
  const Scalar hi = Scalar(1) - Scalar(1e-12);
  if (f(hi) < Scalar(0)) throw std::domain_error("no root: manipulation would drain the reserve");
  return detail::bisect_increasing(f, Scalar(0), hi);
}

// Delta1: token-1 amount paid in to move the quote to (1 + epsilon) m_p from
// the worst-case state.
template <typename Scalar>
Scalar solve_manip_delta1(Scalar r1, Scalar w1, Scalar w2, Scalar gamma, Scalar epsilon) {
  return r1 * manipulation_inflow_fraction(gamma * gamma * (Scalar(1) + epsilon), w1, w2, gamma);
}

// Delta2: token-2 amount taken out by the same trade.
template <typename Scalar>
Scalar solve_manip_delta2(Scalar r2, Scalar w1, Scalar w2, Scalar gamma, Scalar epsilon) {
  return r2 * manipulation_outflow_fraction(gamma * gamma * (Scalar(1) + epsilon), w1, w2, gamma);
}

}  // namespace tfmm
