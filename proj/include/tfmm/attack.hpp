// The three-stage pair attack: manipulate the quote, let the weights update,
// arbitrage the pool back.
#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

#include "tfmm/arbitrage.hpp"
#include "tfmm/manipulation.hpp"
#include "tfmm/pool.hpp"

namespace tfmm {

// One attack evaluation. The attacker pays `base` into the pool and takes
// `pumped` out until the pool's fee-adjusted quote of `pumped` (in `base`) is
// (1 + epsilon) times the market price. The weights then move by
// weight_update before the follow-up arbitrage. Market prices stay fixed.
template <typename Scalar>
struct AttackScenario {
  PoolState<Scalar> pool;
  MarketPrices<Scalar> market;
  TokenVector<Scalar> weight_update;
  Scalar epsilon;
  int base = 0;
  int pumped = 1;
};

using AttackScenariod = AttackScenario<double>;

// All stage quantities, in token units or numeraire value. Flows follow the
// PairArbFlows orientation: arb_out leaves the pool in the base token and
// arb_in enters it in the pumped token (both negative for a reversed arb).
// The fee-aware figures define z; the *_bound figures use fee-free
// arbitrage and define the upper bound z_bound.
template <typename Scalar>
struct AttackOutcome {
  Scalar delta1;
  Scalar delta2;
  Scalar cost;
  Scalar arb_in;
  Scalar arb_out;
  Scalar x_return;
  Scalar x_null;
  Scalar z;
  Scalar x_return_bound;
  Scalar x_null_bound;
  Scalar z_bound;
};

using AttackOutcomed = AttackOutcome<double>;

// Quote deviation of the un-manipulated pool; equals epsilon_null(gamma) when
// the pool sits at the worst case of its no-arbitrage band.
template <typename Scalar>
Scalar scenario_epsilon_null(const AttackScenario<Scalar>& s) {
  return spot_price(s.pool, s.pumped, s.base) / (s.pool.gamma() * s.market.price(s.pumped, s.base)) -
         Scalar(1);
}

template <typename Scalar>
PoolState<Scalar> updated_pool(const PoolState<Scalar>& pool, const TokenVector<Scalar>& weight_update) {
  detail::require(weight_update.size() == pool.size(), "weight update has the wrong length");
  return pool.with_weights(pool.weights() + weight_update);
}

template <typename Scalar>
void validate_scenario(const AttackScenario<Scalar>& s) {
  using std::abs;
  detail::check_pair(s.pool.size(), s.base, s.pumped);
  detail::require(s.market.size() == s.pool.size(), "market and pool differ in size");
  detail::require(s.weight_update.size() == s.pool.size(), "weight update has the wrong length");
  detail::require(abs(s.weight_update.sum()) <= Scalar(kWeightSumTolerance), "weight update must sum to zero");
  (void)updated_pool(s.pool, s.weight_update);
  detail::require(within_no_arb(s.pool, s.market), "pre-attack pool is outside the no-arbitrage band");
}

template <typename Scalar>
struct ManipulationTrade {
  Scalar delta1;  // base token in
  Scalar delta2;  // pumped token out
};

// Stage 1. Solves both implicit equations for the scenario's target quote.
template <typename Scalar>
ManipulationTrade<Scalar> manipulation_trade(const AttackScenario<Scalar>& s) {
  const auto& r = s.pool.reserves();
  const auto& w = s.pool.weights();
  const Scalar gamma = s.pool.gamma();
  const Scalar target = gamma * (Scalar(1) + s.epsilon) * s.market.price(s.pumped, s.base) /
                        spot_price(s.pool, s.pumped, s.base);
  return {r[s.base] * manipulation_inflow_fraction(target, w[s.base], w[s.pumped], gamma),
          r[s.pumped] * manipulation_outflow_fraction(target, w[s.base], w[s.pumped], gamma)};
}

template <typename Scalar>
PoolState<Scalar> manipulated_pool(const AttackScenario<Scalar>& s, const ManipulationTrade<Scalar>& t) {
  TokenVector<Scalar> r = s.pool.reserves();
  r[s.base] += t.delta1;
  r[s.pumped] -= t.delta2;
  return s.pool.with_reserves(std::move(r));
}

// C(epsilon) in numeraire: value paid in minus value taken out.
template <typename Scalar>
Scalar manipulation_cost(const AttackScenario<Scalar>& s) {
  const auto t = manipulation_trade(s);
  const auto& p = s.market.prices();
  return p[s.base] * t.delta1 - p[s.pumped] * t.delta2;
}

// X_{gamma=1}(epsilon): fee-free arbitrage return after manipulation and update.
template <typename Scalar>
Scalar arb_return_upper_bound(const AttackScenario<Scalar>& s) {
  const auto t = manipulation_trade(s);
  const auto after = updated_pool(manipulated_pool(s, t), s.weight_update);
  return no_fee_pair_arb(after, s.market, s.base, s.pumped).profit;
}

template <typename Scalar>
AttackOutcome<Scalar> run_pair_attack(const AttackScenario<Scalar>& s) {
  validate_scenario(s);
  const auto t = manipulation_trade(s);
  const auto& p = s.market.prices();
  const Scalar cost = p[s.base] * t.delta1 - p[s.pumped] * t.delta2;

  const auto attacked = updated_pool(manipulated_pool(s, t), s.weight_update);
  const auto untouched = updated_pool(s.pool, s.weight_update);

  const auto fee_arb = arb_fee_aware_pair(attacked, s.market, s.base, s.pumped);
  const auto fee_null = arb_fee_aware_pair(untouched, s.market, s.base, s.pumped);
  const Scalar bound = no_fee_pair_arb(attacked, s.market, s.base, s.pumped).profit;
  const Scalar bound_null = no_fee_pair_arb(untouched, s.market, s.base, s.pumped).profit;

  AttackOutcome<Scalar> out{};
  out.delta1 = t.delta1;
  out.delta2 = t.delta2;
  out.cost = cost;
  out.arb_out = fee_arb.trade.lambda_out[s.base] - fee_arb.trade.delta_in[s.base];
  out.arb_in = fee_arb.trade.delta_in[s.pumped] - fee_arb.trade.lambda_out[s.pumped];
  out.x_return = fee_arb.profit;
  out.x_null = fee_null.profit;
  out.z = out.x_return - cost - out.x_null;
  out.x_return_bound = bound;
  out.x_null_bound = bound_null;
  out.z_bound = bound - cost - bound_null;
  return out;
}

}  // namespace tfmm
