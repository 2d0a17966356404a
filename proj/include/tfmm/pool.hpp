// Geometric-mean pool with time-varying weights: invariant, trade acceptance,
// pair quotes, spot prices and the fee-induced no-arbitrage band.
//
// Everything here is templated on the scalar type so the same model can be
// evaluated in double (the default) or long double.
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

#include <Eigen/Core>

namespace tfmm {

// Token vectors never allocate: capacity is fixed, length is dynamic.
inline constexpr int kMaxTokens = 16;

template <typename Scalar>
using TokenVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxTokens, 1>;

using TokenVectord = TokenVector<double>;

// Construction limits and the acceptance tolerance of the trading function.
inline constexpr double kWeightSumTolerance = 1e-12;
inline constexpr double kMinWeight = 1e-9;
inline constexpr double kMinReserve = 1e-12;
inline constexpr double kAcceptanceRelTolerance = 1e-12;

namespace detail {

inline void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

inline void check_pair(int n, int i, int j) {
  require(i >= 0 && i < n && j >= 0 && j < n, "token index out of range");
  require(i != j, "token pair must be two distinct tokens");
}

}  // namespace detail

template <typename Scalar>
class PoolState {
 public:
  using Vector = TokenVector<Scalar>;

  PoolState(Vector reserves, Vector weights, Scalar gamma)
      : reserves_(std::move(reserves)), weights_(std::move(weights)), gamma_(gamma) {
    using std::abs;
    using std::isfinite;
    const auto n = reserves_.size();
    detail::require(n >= 2, "pool needs at least two tokens");
    detail::require(weights_.size() == n, "reserves and weights differ in length");
    detail::require(gamma_ > Scalar(0) && gamma_ <= Scalar(1), "gamma must lie in (0, 1]");
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!(isfinite(reserves_[i]) && reserves_[i] >= Scalar(kMinReserve)))
        throw std::invalid_argument("reserve " + std::to_string(i) + " is not a positive finite amount");
      if (!(isfinite(weights_[i]) && weights_[i] >= Scalar(kMinWeight) && weights_[i] < Scalar(1)))
        throw std::invalid_argument("weight " + std::to_string(i) + " is outside the open simplex");
    }
    detail::require(abs(weights_.sum() - Scalar(1)) <= Scalar(kWeightSumTolerance),
                    "weights must sum to one");
  }

  const Vector& reserves() const { return reserves_; }
  const Vector& weights() const { return weights_; }
  Scalar gamma() const { return gamma_; }
  int size() const { return static_cast<int>(reserves_.size()); }

  PoolState with_reserves(Vector reserves) const { return {std::move(reserves), weights_, gamma_}; }
  PoolState with_weights(Vector weights) const { return {reserves_, std::move(weights), gamma_}; }

 private:
  Vector reserves_;
  Vector weights_;
  Scalar gamma_;
};

using PoolStated = PoolState<double>;

// Tokens given to the pool (delta_in) and taken from it (lambda_out).
template <typename Scalar>
struct TradeIntent {
  TokenVector<Scalar> delta_in;
  TokenVector<Scalar> lambda_out;

  static TradeIntent zero(int n) {
    return {TokenVector<Scalar>::Zero(n), TokenVector<Scalar>::Zero(n)};
  }
};

using TradeIntentd = TradeIntent<double>;

// External prices in units of the numeraire, which is token 0.
template <typename Scalar>
class MarketPrices {
 public:
  using Vector = TokenVector<Scalar>;

  explicit MarketPrices(Vector prices) : prices_(std::move(prices)) {
    using std::isfinite;
    detail::require(prices_.size() >= 2, "market needs at least two prices");
    for (Eigen::Index i = 0; i < prices_.size(); ++i)
      if (!(isfinite(prices_[i]) && prices_[i] > Scalar(0)))
        throw std::invalid_argument("market price " + std::to_string(i) + " must be positive");
    detail::require(prices_[0] == Scalar(1), "numeraire price must be exactly 1");
  }

  const Vector& prices() const { return prices_; }
  int size() const { return static_cast<int>(prices_.size()); }

  // Price of token i in units of token j.
  Scalar price(int i, int j) const { return prices_[i] / prices_[j]; }

 private:
  Vector prices_;
};

using MarketPricesd = MarketPrices<double>;

template <typename Scalar>
struct QuoteBand {
  Scalar lower;
  Scalar upper;

  bool contains(Scalar price) const { return price >= lower && price <= upper; }
};

// sum_i w_i ln R_i, the log of the trading-function value.
template <typename Scalar>
Scalar log_invariant(const PoolState<Scalar>& pool) {
  return (pool.weights().array() * pool.reserves().array().log()).sum();
}

// k = prod_i R_i^{w_i}. Recomputed from state on every call: weight updates move k.
template <typename Scalar>
Scalar invariant_k(const PoolState<Scalar>& pool) {
  using std::exp;
  return exp(log_invariant(pool));
}

enum class TradeVerdict { accepted, self_trade, drains_reserve, below_invariant, malformed };

inline std::string_view to_string(TradeVerdict v) {
  switch (v) {
    case TradeVerdict::accepted: return "accepted";
    case TradeVerdict::self_trade: return "self-trade";
    case TradeVerdict::drains_reserve: return "drains-reserve";
    case TradeVerdict::below_invariant: return "below-invariant";
    case TradeVerdict::malformed: return "malformed";
  }
  return "unknown";
}

template <typename Scalar>
struct TradeDecision {
  TradeVerdict verdict;
  Scalar log_margin;  // sum w ln(R + gamma*Delta - Lambda) - ln k

  bool accepted() const { return verdict == TradeVerdict::accepted; }
};

// Accepts trades that keep prod (R + gamma*Delta - Lambda)^w >= k, within
// kAcceptanceRelTolerance relative to k. Trades that increase k are accepted.
template <typename Scalar>
TradeDecision<Scalar> validate_trade(const PoolState<Scalar>& pool, const TradeIntent<Scalar>& trade) {
  using std::log;
  const int n = pool.size();
  if (trade.delta_in.size() != n || trade.lambda_out.size() != n)
    return {TradeVerdict::malformed, Scalar(0)};
  for (int i = 0; i < n; ++i) {
    if (trade.delta_in[i] < Scalar(0) || trade.lambda_out[i] < Scalar(0))
      return {TradeVerdict::malformed, Scalar(0)};
    if (trade.delta_in[i] > Scalar(0) && trade.lambda_out[i] > Scalar(0))
      return {TradeVerdict::self_trade, Scalar(0)};
    if (trade.lambda_out[i] >= pool.reserves()[i]) return {TradeVerdict::drains_reserve, Scalar(0)};
  }
  Scalar after = 0;
  for (int i = 0; i < n; ++i)
    after += pool.weights()[i] *
             log(pool.reserves()[i] + pool.gamma() * trade.delta_in[i] - trade.lambda_out[i]);
  const Scalar margin = after - log_invariant(pool);
  if (margin < -Scalar(kAcceptanceRelTolerance)) return {TradeVerdict::below_invariant, margin};
  return {TradeVerdict::accepted, margin};
}

// Amount of token j the pool pays for delta_i of token i, with the invariant
// held at equality: R_j (1 - (1 + gamma delta_i / R_i)^(-w_i/w_j)).
template <typename Scalar>
Scalar quote_pair_trade(const PoolState<Scalar>& pool, int i, int j, Scalar delta_i) {
  using std::expm1;
  using std::log1p;
  detail::check_pair(pool.size(), i, j);
  detail::require(delta_i >= Scalar(0), "trade amount must be non-negative");
  const auto& r = pool.reserves();
  const auto& w = pool.weights();
  const Scalar exponent = -(w[i] / w[j]) * log1p(pool.gamma() * delta_i / r[i]);
  Scalar out = -r[j] * expm1(exponent);
  if (out > r[j] / 2) {
    // Nearly draining: R_j - out is exact here, so round out down until the
    // pool keeps at least the reserve the invariant requires.
    using std::exp;
    using std::nextafter;
    const Scalar keep = r[j] * exp(exponent);
    while (out > Scalar(0) && r[j] - out < keep) out = nextafter(out, Scalar(0));
  }
  return out;
}

// Fee-free marginal price of token i in units of token j: (w_i/R_i)/(w_j/R_j).
template <typename Scalar>
Scalar spot_price(const PoolState<Scalar>& pool, int i, int j) {
  detail::check_pair(pool.size(), i, j);
  const auto& r = pool.reserves();
  const auto& w = pool.weights();
  return (w[i] / r[i]) / (w[j] / r[j]);
}

// Marginal cost, in token j, of buying token i from the pool once the fee is paid.
template <typename Scalar>
Scalar fee_adjusted_quote(const PoolState<Scalar>& pool, int i, int j) {
  return spot_price(pool, i, j) / pool.gamma();
}

// External prices of token i (in token j) inside this band admit no
// profitable pair arbitrage in either direction.
template <typename Scalar>
QuoteBand<Scalar> no_arb_band(const PoolState<Scalar>& pool, int i, int j) {
  const Scalar mu = spot_price(pool, i, j);
  return {pool.gamma() * mu, mu / pool.gamma()};
}

// True when every token pair quotes inside its no-arbitrage band.
template <typename Scalar>
bool within_no_arb(const PoolState<Scalar>& pool, const MarketPrices<Scalar>& market,
                   Scalar rel_tol = Scalar(kAcceptanceRelTolerance)) {
  detail::require(market.size() == pool.size(), "market and pool differ in size");
  // r_k = market / spot (both in numeraire); all pairs are inside their bands
  // iff max r / min r <= 1/gamma.
  Scalar lo = 0, hi = 0;
  for (int k = 0; k < pool.size(); ++k) {
    const Scalar spot = k == 0 ? Scalar(1) : spot_price(pool, k, 0);
    const Scalar r = market.prices()[k] / spot;
    if (k == 0 || r < lo) lo = r;
    if (k == 0 || r > hi) hi = r;
  }
  return hi * pool.gamma() <= lo * (Scalar(1) + rel_tol);
}

// Spot prices of every token in the numeraire.
template <typename Scalar>
TokenVector<Scalar> spot_prices(const PoolState<Scalar>& pool) {
  TokenVector<Scalar> s(pool.size());
  s[0] = Scalar(1);
  for (int k = 1; k < pool.size(); ++k) s[k] = spot_price(pool, k, 0);
  return s;
}

// Market in which the pool's fee-free price of `pumped` (in `base`) sits at
// the top of the no-arbitrage band, m_u = m_p / gamma; every other token is
// priced at spot.
template <typename Scalar>
MarketPrices<Scalar> worst_case_market(const PoolState<Scalar>& pool, int base, int pumped) {
  detail::check_pair(pool.size(), base, pumped);
  TokenVector<Scalar> p = spot_prices(pool);
  p[pumped] *= pool.gamma();
  p /= p[0];
  p[0] = Scalar(1);
  return MarketPrices<Scalar>(std::move(p));
}

// Numeraire value of the reserves.
template <typename Scalar>
Scalar pool_value(const PoolState<Scalar>& pool, const MarketPrices<Scalar>& market) {
  return pool.reserves().dot(market.prices());
}

}  // namespace tfmm
