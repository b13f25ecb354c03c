#pragma once

#include <cmath>
#include <stdexcept>

#include "decoyrate/bisection.hpp"

namespace decoyrate {

// Binary entropy in bits, h(0) = h(1) = 0.
inline double binary_entropy(double e) {
  if (!(e >= 0.0 && e <= 1.0))
    throw std::invalid_argument("binary_entropy: argument outside [0, 1]");
  if (e == 0.0 || e == 1.0) return 0.0;
  return -e * std::log2(e) - (1.0 - e) * std::log2(1.0 - e);
}

// Linear minorant of 1 - h(e): value(e) = intercept - slope * e, tangent to
// the curve at e = point. 1 - h is convex, so value(e) <= 1 - h(e)
// everywhere, with equality at the tangency point.
struct TangentLine {
  double point = 0.0;
  double intercept = 1.0;  // 1 + log2(1 - point)
  double slope = 0.0;      // log2(1 - point) - log2(point)
  double value(double e) const { return intercept - slope * e; }
};

inline TangentLine tangent_at(double et) {
  if (!(et > 0.0 && et <= 0.5))
    throw std::invalid_argument("tangent_at: tangency point outside (0, 1/2]");
  TangentLine t;
  t.point = et;
  t.intercept = 1.0 + std::log2(1.0 - et);
  t.slope = std::log2(1.0 - et) - std::log2(et);
  return t;
}

// The two-intensity estimator stays a valid lower bound only while dropping
// the background term is conservative, which for intensities mu >= nu reads
//
//   (intercept - slope) * nu / (mu + nu) + slope - 2 * intercept >= 0.
//
// Steep tangents (small tangency points) satisfy it; flat ones do not.
inline double feasibility_margin(const TangentLine& t, double mu, double nu) {
  if (!(mu > 0.0 && nu > 0.0 && nu <= mu))
    throw std::invalid_argument("feasibility_margin: need mu >= nu > 0");
  return (t.intercept - t.slope) * nu / (mu + nu) + (t.slope - 2.0 * t.intercept);
}

// Largest tangency point with nonnegative feasibility margin. The margin as
// a function of the tangency point falls from +inf, bottoms out at
// e = (1-r)/(2-r) with r = nu/(mu+nu), then climbs back to 0 from below at
// e = 1/2 -- so the unique sign change sits left of that minimum and plain
// bisection finds it.
inline double max_feasible_et(double mu, double nu) {
  if (!(mu > 0.0 && nu > 0.0 && nu <= mu))
    throw std::invalid_argument("max_feasible_et: need mu >= nu > 0");
  const double r = nu / (mu + nu);
  const double at_min = (1.0 - r) / (2.0 - r);
  return bisect_root(
      [&](double e) { return feasibility_margin(tangent_at(e), mu, nu); }, 1e-9, at_min);
}

}  // namespace decoyrate
