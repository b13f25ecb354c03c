#pragma once

#include <cmath>
#include <stdexcept>

namespace decoyrate {

// Root of f on [lo, hi] by bisection. f(lo) and f(hi) must bracket zero.
// Runs until the interval is ~1e-14 of its midpoint (or 200 halvings), so the
// result is accurate to the last few ulps for well-scaled problems.
template <class F>
double bisect_root(F&& f, double lo, double hi) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0))
    throw std::invalid_argument("bisect_root: endpoints do not bracket a root");
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;  // interval exhausted in doubles
    double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
    if (hi - lo <= 1e-14 * (std::fabs(lo) + std::fabs(hi))) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace decoyrate
