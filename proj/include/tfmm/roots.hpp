// Scalar root finders for monotone functions.
#pragma once

#include <cmath>
#include <stdexcept>

namespace tfmm::detail {

// Root of an increasing f on [lo, hi] with f(lo) <= 0 <= f(hi). Halves the
// bracket until it cannot shrink any further in Scalar precision.
template <typename Scalar, typename F>
Scalar bisect_increasing(F&& f, Scalar lo, Scalar hi) {
  for (int it = 0; it < 2000; ++it) {
    const Scalar mid = lo + (hi - lo) / 2;
    if (!(mid > lo && mid < hi)) break;
    if (f(mid) < Scalar(0))
      lo = mid;
    else
      hi = mid;
  }
  using std::abs;
  return abs(f(lo)) <= abs(f(hi)) ? lo : hi;
}

// Grows hi by doubling until f(hi) >= 0.
template <typename Scalar, typename F>
Scalar bracket_above(F&& f, Scalar hi, int max_doublings = 200) {
  for (int it = 0; it < max_doublings; ++it) {
    if (f(hi) >= Scalar(0)) return hi;
    hi *= 2;
  }
  throw std::domain_error("could not bracket root");
}

// Safeguarded Newton for an increasing f with f(lo) <= 0 <= f(hi); df is f'.
// Falls back to bisection whenever the Newton step leaves the bracket.
template <typename Scalar, typename F, typename DF>
Scalar newton_increasing(F&& f, DF&& df, Scalar lo, Scalar hi, Scalar x0,
                         Scalar rel_tol = Scalar(1e-15), int max_iters = 100) {
  using std::abs;
  Scalar x = x0;
  for (int it = 0; it < max_iters; ++it) {
    const Scalar fx = f(x);
    if (fx == Scalar(0)) return x;
    if (fx < Scalar(0))
      lo = x;
    else
      hi = x;
    const Scalar d = df(x);
    Scalar next = d > Scalar(0) ? x - fx / d : lo + (hi - lo) / 2;
    if (!(next > lo && next < hi)) next = lo + (hi - lo) / 2;
    if (abs(next - x) <= rel_tol * abs(x) || next == x) return next;
    x = next;
  }
  return x;
}

}  // namespace tfmm::detail
