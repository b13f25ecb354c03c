#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>

#include "decoyrate/bisection.hpp"

namespace decoyrate {

enum class DeviationMethod { SymmetricAnalytical, AsymmetricSearch };

// Multiplicative deviation bounds for the unknown expectation E of a sum of
// independent [0,1]-valued variables whose realized value is phi. Each side
// fails with probability at most epsilon:
//
//   E >= phi / (1 + delta_minus)      (lower estimate)
//   E <= phi / (1 - delta_plus)       (upper estimate)
//
// delta_minus may exceed 1; delta_plus always lies in [0, 1). A side is
// flagged vacuous when no deviation achieves the target failure probability
// (phi too small); the corresponding estimate then carries no information and
// callers must substitute a structural bound (0 or the physical maximum).
struct Deviation {
  double delta_minus = 0.0;
  double delta_plus = 0.0;
  DeviationMethod method = DeviationMethod::SymmetricAnalytical;
  bool minus_vacuous = false;
  bool plus_vacuous = false;
};

namespace detail {

inline void check_phi_eps(double phi, double eps) {
  if (!(phi >= 0.0) || !std::isfinite(phi))
    throw std::invalid_argument("deviation: phi must be finite and nonnegative");
  if (!(eps > 0.0) || !(eps < 1.0))
    throw std::invalid_argument("deviation: epsilon must lie in (0, 1)");
}

// Log of the tail probability bound governing the lower estimate:
//   [ e^d / (1+d)^{1+d} ] ^ { phi / (1+d) }
inline double log_tail_minus(double phi, double d) {
  return phi * (d / (1.0 + d) - std::log1p(d));
}

// Log of the tail probability bound governing the upper estimate:
//   [ e^{-d} / (1-d)^{1-d} ] ^ { phi / (1+d) }
inline double log_tail_plus(double phi, double d) {
  return phi * (-d - (1.0 - d) * std::log1p(-d)) / (1.0 + d);
}

// Log of the two-sided bound both analytical solutions invert:
//   exp( -d^2/(2+d) * phi/(1+d) )
inline double log_tail_symmetric(double phi, double d) {
  return -phi * d * d / ((2.0 + d) * (1.0 + d));
}

}  // namespace detail

// Closed-form delta solving exp(-d^2/(2+d) * phi/(1+d)) = epsilon, used for
// both sides at once. The quadratic this reduces to has a root <= 1 exactly
// when phi > -6 ln(epsilon); outside that regime the closed form is invalid
// and nullopt is returned so the caller can fall back to the one-sided
// searches.
inline std::optional<Deviation> solve_delta_symmetric(double phi, double eps) {
  detail::check_phi_eps(phi, eps);
  const double L = -std::log(eps);  // > 0
  if (!(phi > 6.0 * L)) return std::nullopt;
  const double delta = (3.0 * L + std::sqrt(L * L + 8.0 * L * phi)) / (2.0 * (phi - L));
  Deviation d;
  d.delta_minus = delta;
  d.delta_plus = delta;
  d.method = DeviationMethod::SymmetricAnalytical;
  return d;
}

// One-sided deviations found by bisection on the exact tail expressions.
// Tighter than the symmetric form for small phi, and the only option once
// phi <= -6 ln(epsilon). Brackets: delta_minus in [0, 1e3] (the lower
// estimate degrades gracefully for small phi but a root can sit far above 1),
// delta_plus in [0, 1 - 1e-12]. A missing root inside the bracket marks that
// side vacuous; for delta_plus that happens exactly when exp(-phi/2) >
// epsilon, i.e. phi < -2 ln(epsilon).
inline Deviation solve_delta_asymmetric(double phi, double eps) {
  detail::check_phi_eps(phi, eps);
  const double log_eps = std::log(eps);
  constexpr double kMinusHi = 1e3;
  constexpr double kPlusHi = 1.0 - 1e-12;
  Deviation d;
  d.method = DeviationMethod::AsymmetricSearch;
  if (phi == 0.0 || detail::log_tail_minus(phi, kMinusHi) > log_eps) {
    d.minus_vacuous = true;
    d.delta_minus = kMinusHi;
  } else {
    d.delta_minus = bisect_root(
        [&](double x) { return detail::log_tail_minus(phi, x) - log_eps; }, 0.0, kMinusHi);
  }
  if (phi == 0.0 || detail::log_tail_plus(phi, kPlusHi) > log_eps) {
    d.plus_vacuous = true;
    d.delta_plus = kPlusHi;
  } else {
    d.delta_plus = bisect_root(
        [&](double x) { return detail::log_tail_plus(phi, x) - log_eps; }, 0.0, kPlusHi);
  }
  return d;
}

// When to prefer the closed form: phi > analytical_threshold * (-ln eps).
// The improved estimator uses a conservative threshold of 100 (the closed
// form is only adopted deep in its asymptotically-equivalent regime); the
// baseline estimators use 6, i.e. the closed form whenever it is valid at
// all. Both choices yield honest bounds -- the threshold only trades
// tightness near the validity edge.
struct DeltaPolicy {
  double analytical_threshold = 100.0;
};

inline Deviation solve_delta(double phi, double eps, const DeltaPolicy& policy = {}) {
  detail::check_phi_eps(phi, eps);
  const double L = -std::log(eps);
  if (phi > policy.analytical_threshold * L) {
    if (auto d = solve_delta_symmetric(phi, eps)) return *d;
  }
  return solve_delta_asymmetric(phi, eps);
}

enum class KnownExpectationForm {
  Exact,         // solves exp(-d^2/(2+d) * E) = epsilon exactly
  Reproduction,  // widespread shortcut (L + sqrt(L^2 + 4LE)) / 2E; understates delta
};

// Deviation for a count whose expectation E is known exactly (no observation
// involved). delta solves exp(-delta^2/(2+delta) * E) = epsilon; the estimate
// used downstream, X >= E/(1+delta), fails with probability at most epsilon.
inline double solve_delta_known_expectation(
    double expectation, double eps,
    KnownExpectationForm form = KnownExpectationForm::Exact) {
  if (!(expectation > 0.0) || !std::isfinite(expectation))
    throw std::invalid_argument("known expectation must be positive and finite");
  if (!(eps > 0.0) || !(eps < 1.0))
    throw std::invalid_argument("epsilon must lie in (0, 1)");
  const double L = -std::log(eps);
  if (form == KnownExpectationForm::Exact)
    return (L + std::sqrt(L * L + 8.0 * L * expectation)) / (2.0 * expectation);
  return (L + std::sqrt(L * L + 4.0 * L * expectation)) / (2.0 * expectation);
}

}  // namespace decoyrate
