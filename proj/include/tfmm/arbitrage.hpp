// Arbitrage against a pool at fixed external prices.
//
// Pair trades come in three flavours:
//  * fee-free (gamma = 1) closed form, which brings the fee-free quote to the
//    market price and bounds every fee-paying arbitrage from above;
//  * fee-aware optimum, the profit-maximising single pair trade with fees;
//  * price-matched fee trade, the fee-paying trade that lands on the same
//    post-trade price as the fee-free one (used to compare the two legs).
// The N-token oracle solves the full fee-aware problem exactly.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "tfmm/pool.hpp"
#include "tfmm/roots.hpp"

namespace tfmm {

// Signed pair arbitrage flows in the orientation of the pumped-token attack:
// out_amount leaves the pool in the base token, in_amount enters it in the
// other token. Both are negative when the profitable direction is reversed.
template <typename Scalar>
struct PairArbFlows {
  Scalar out_amount;
  Scalar in_amount;
};

template <typename Scalar>
struct ArbTrade {
  TradeIntent<Scalar> trade;
  Scalar profit;  // numeraire value received minus numeraire value paid
  bool converged;
};

using ArbTraded = ArbTrade<double>;

// Fee-free arbitrage after a weight update applied to a manipulated pool,
// written in terms of the quote deviation epsilon (worst-case start):
//   rho = (w2/w2') (w1'/w1) / (gamma (1 + epsilon))
//   out = R1' (1 - rho^(w2'/(w1'+w2'))),  in = R2' (rho^(-w1'/(w1'+w2')) - 1)
template <typename Scalar>
PairArbFlows<Scalar> arb_trade_closed_form(Scalar r1p, Scalar r2p, Scalar w1, Scalar w2, Scalar w1p,
                                           Scalar w2p, Scalar gamma, Scalar epsilon) {
  using std::expm1;
  using std::log;
  const Scalar log_rho = log((w2 / w2p) * (w1p / w1)) - log(gamma) - log(Scalar(1) + epsilon);
  const Scalar s = w1p + w2p;
  return {-r1p * expm1(log_rho * w2p / s), r2p * expm1(-log_rho * w1p / s)};
}

template <typename Scalar>
struct PairArb {
  PairArbFlows<Scalar> flows;
  Scalar profit;
};

// Fee-free pair arbitrage read off the pool state: trades base against other
// until the fee-free price of `other` equals the market price. Profitable in
// either direction; the sign of the flows tells which.
template <typename Scalar>
PairArb<Scalar> no_fee_pair_arb(const PoolState<Scalar>& pool, const MarketPrices<Scalar>& market,
                                int base, int other) {
  using std::expm1;
  using std::log;
  detail::check_pair(pool.size(), base, other);
  const auto& r = pool.reserves();
  const auto& w = pool.weights();
  const Scalar log_rho = log(market.price(other, base)) - log(spot_price(pool, other, base));
  const Scalar s = w[base] + w[other];
  PairArbFlows<Scalar> flows{-r[base] * expm1(log_rho * w[other] / s),
                             r[other] * expm1(-log_rho * w[base] / s)};
  const auto& p = market.prices();
  return {flows, p[base] * flows.out_amount - p[other] * flows.in_amount};
}

namespace detail {

// Best single trade paying `in` and receiving `out`; zero if unprofitable.
// With u = 1 + gamma Delta / R_in the first-order condition gives
//   u^((w_in + w_out)/w_out) = gamma spot(in, out) p_out / p_in.
template <typename Scalar>
bool directed_fee_arb(const PoolState<Scalar>& pool, const MarketPrices<Scalar>& market, int in, int out,
                      ArbTrade<Scalar>& result) {
  using std::expm1;
  using std::log;
  const auto& r = pool.reserves();
  const auto& w = pool.weights();
  const auto& p = market.prices();
  const Scalar log_q = log(pool.gamma()) + log(spot_price(pool, in, out)) + log(p[out]) - log(p[in]);
  if (!(log_q > Scalar(0))) return false;
  const Scalar s = w[in] + w[out];
  const Scalar delta = r[in] * expm1(log_q * w[out] / s) / pool.gamma();
  const Scalar lambda = -r[out] * expm1(-log_q * w[in] / s);
  result.trade.delta_in[in] = delta;
  result.trade.lambda_out[out] = lambda;
  result.profit = p[out] * lambda - p[in] * delta;
  return true;
}

}  // namespace detail

// Profit-maximising fee-paying pair arbitrage between tokens i and j. Zero
// trade when the market price lies inside the pool's no-arbitrage band.
template <typename Scalar>
ArbTrade<Scalar> arb_fee_aware_pair(const PoolState<Scalar>& pool, const MarketPrices<Scalar>& market,
                                    int i, int j) {
  using std::isfinite;
  detail::check_pair(pool.size(), i, j);
  ArbTrade<Scalar> result{TradeIntent<Scalar>::zero(pool.size()), Scalar(0), true};
  if (!detail::directed_fee_arb(pool, market, i, j, result))
    detail::directed_fee_arb(pool, market, j, i, result);
  result.converged = isfinite(result.profit);
  return result;
}

// Fee-paying pair trade in the fee-free trade's direction that ends at the
// same post-trade reserve ratio. Pays more in and takes less out than the
// fee-free trade; flows use the PairArbFlows orientation.
template <typename Scalar>
PairArbFlows<Scalar> arb_fee_price_matched_pair(const PoolState<Scalar>& pool,
                                                const MarketPrices<Scalar>& market, int base, int other) {
  using std::log;
  const auto free = no_fee_pair_arb(pool, market, base, other).flows;
  if (free.out_amount == Scalar(0) && free.in_amount == Scalar(0)) return free;

  const bool forward = free.in_amount > Scalar(0);
  const int in = forward ? other : base;
  const int out = forward ? base : other;
  const Scalar free_in = forward ? free.in_amount : -free.out_amount;
  const Scalar free_out = forward ? free.out_amount : -free.in_amount;

  const auto& r = pool.reserves();
  const auto& w = pool.weights();
  const Scalar gamma = pool.gamma();
  // Post-trade ratio R_out'' / R_in'' shared by both trades.
  const Scalar ratio = (r[out] - free_out) / (r[in] + free_in);
  const Scalar target = w[out] * log(r[out]) + w[in] * log(r[in]);
  auto f = [&](Scalar d) { return w[out] * log(ratio * (r[in] + d)) + w[in] * log(r[in] + gamma * d) - target; };
  const Scalar hi = detail::bracket_above(f, free_in * 2 + r[in] * Scalar(1e-12));
  const Scalar paid = detail::bisect_increasing(f, free_in, hi);
  const Scalar received = r[out] - ratio * (r[in] + paid);
  if (forward) return {received, paid};
  return {-paid, -received};
}

// Exact fee-aware N-token arbitrage.
//
// With a_k = w_k / p_k the optimality conditions fix each token's effective
// post-trade reserve R~_k = R_k + gamma Delta_k - Lambda_k at
//   gamma lambda a_k  (token paid in),  lambda a_k (token taken out),  R_k (untouched),
// i.e. R~_k = median(gamma lambda a_k, R_k, lambda a_k). The multiplier solves
// sum_k w_k ln R~_k(lambda) = ln k, which in L = ln lambda reads
//   h(L) = sum_k w_k [min(0, L - bo_k) + max(0, L - bi_k)] = 0,
//   bo_k = ln(R_k / a_k),  bi_k = bo_k - ln gamma.
// h is piecewise linear and non-decreasing, so the root is found exactly by
// walking the sorted breakpoints. The problem is concave, hence the KKT point
// is the global optimum.
template <typename Scalar>
ArbTrade<Scalar> arb_fee_aware_ntoken(const PoolState<Scalar>& pool, const MarketPrices<Scalar>& market) {
  using std::exp;
  using std::expm1;
  using std::isfinite;
  using std::log;
  const int n = pool.size();
  detail::require(market.size() == n, "market and pool differ in size");
  const auto& r = pool.reserves();
  const auto& w = pool.weights();
  const auto& p = market.prices();
  const Scalar log_gamma = log(pool.gamma());

  TokenVector<Scalar> bo(n), bi(n);
  for (int k = 0; k < n; ++k) {
    bo[k] = log(r[k]) - log(w[k] / p[k]);
    bi[k] = bo[k] - log_gamma;
  }
  ArbTrade<Scalar> result{TradeIntent<Scalar>::zero(n), Scalar(0), true};
  if (!bo.allFinite()) {
    result.converged = false;
    return result;
  }
  // A flat zero level of h means no token wants to move.
  if (bo.maxCoeff() <= bi.minCoeff()) return result;

  auto h = [&](Scalar L) {
    Scalar acc = 0;
    for (int k = 0; k < n; ++k) acc += w[k] * (std::min(Scalar(0), L - bo[k]) + std::max(Scalar(0), L - bi[k]));
    return acc;
  };
  auto slope = [&](Scalar L) {
    Scalar acc = 0;
    for (int k = 0; k < n; ++k) acc += w[k] * (Scalar(L < bo[k]) + Scalar(L > bi[k]));
    return acc;
  };

  std::array<Scalar, 2 * kMaxTokens> points{};
  for (int k = 0; k < n; ++k) {
    points[2 * k] = bo[k];
    points[2 * k + 1] = bi[k];
  }
  const auto end = points.begin() + 2 * n;
  std::sort(points.begin(), end);

  Scalar L = 0;
  Scalar prev = points[0];
  Scalar h_prev = h(prev);
  if (h_prev >= Scalar(0)) {
    L = prev - h_prev / slope(prev - Scalar(1));
  } else {
    bool found = false;
    for (auto it = points.begin() + 1; it != end; ++it) {
      const Scalar h_here = h(*it);
      if (h_here >= Scalar(0)) {
        // Linear on [prev, *it].
        L = *it > prev ? prev + (*it - prev) * (-h_prev) / (h_here - h_prev) : *it;
        found = true;
        break;
      }
      prev = *it;
      h_prev = h_here;
    }
    if (!found) L = prev - h_prev / slope(prev + Scalar(1));
  }

  Scalar profit = 0;
  for (int k = 0; k < n; ++k) {
    if (L < bo[k]) {
      const Scalar lambda = -r[k] * expm1(L - bo[k]);
      result.trade.lambda_out[k] = lambda;
      profit += p[k] * lambda;
    } else if (L > bi[k]) {
      const Scalar delta = r[k] * expm1(L - bi[k]) / pool.gamma();
      result.trade.delta_in[k] = delta;
      profit -= p[k] * delta;
    }
  }
  result.profit = profit;
  result.converged = isfinite(profit);
  return result;
}

}  // namespace tfmm
