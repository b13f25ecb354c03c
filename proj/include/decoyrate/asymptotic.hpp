#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "decoyrate/channel.hpp"
#include "decoyrate/entropy.hpp"

namespace decoyrate {

struct YieldBound {
  double value = 0.0;
  bool clamped = false;
};

// Single-photon yield lower bound from the two gains, for a fixed background
// yield y0:
//
//   Y1 >= [mu^2 Q_nu e^nu - nu^2 Q_mu e^mu - (mu^2 - nu^2) y0] / (mu nu (mu - nu))
//
// Clamped to [0, 1]; the flag records that the raw value fell outside.
inline YieldBound one_decoy_y1_lower(const ObservedRates& r, const SourceParams& s, double y0) {
  const double mu = s.mu, nu = s.nu;
  const double raw = (mu * mu * r.q_nu * std::exp(nu) - nu * nu * r.q_mu * std::exp(mu) -
                      (mu * mu - nu * nu) * y0) /
                     (mu * nu * (mu - nu));
  YieldBound b;
  b.value = std::clamp(raw, 0.0, 1.0);
  b.clamped = raw != b.value;
  return b;
}

// Single-photon error-rate upper bound: each intensity's error-gain caps
// e1 * Y1 from above, and the smaller cap wins. With no single-photon signal
// to speak of (y1_lower <= 0) the error rate is unconstrained, i.e. 1/2.
inline double one_decoy_e1_upper(const ObservedRates& r, const SourceParams& s, double y0,
                                 double y1_lower) {
  if (!(y1_lower > 0.0)) return 0.5;
  const double lim_mu =
      (r.eq_mu * std::exp(s.mu) - kVacuumErrorRate * y0) / (s.mu * y1_lower);
  const double lim_nu =
      (r.eq_nu * std::exp(s.nu) - kVacuumErrorRate * y0) / (s.nu * y1_lower);
  return std::clamp(std::min(lim_mu, lim_nu), 0.0, 0.5);
}

// Largest background yield consistent with the decoy error-gain (all decoy
// errors attributed to background clicks), capped at 1.
inline double one_decoy_y0_cap(const ObservedRates& r, const SourceParams& s) {
  return std::min(1.0, r.eq_nu * std::exp(s.nu) / kVacuumErrorRate);
}

struct OneDecoyBounds {
  double y1 = 0.0;
  double e1 = 0.5;
  double y0_low = 0.0;
  double y0_high = 0.0;
};

// Worst case of each bound separately over the admissible background-yield
// interval, scanned on a fixed 100-point grid. The yield bound is worst at
// the top of the interval and the error bound at the bottom (with the worst
// yield already fixed in its denominator); the grid keeps that robust
// without assuming monotonicity. Pass y0_high < 0 to use the error-gain cap.
inline OneDecoyBounds one_decoy_bounds(const ObservedRates& r, const SourceParams& s,
                                       double y0_low = 0.0, double y0_high = -1.0) {
  OneDecoyBounds out;
  out.y0_low = std::max(0.0, y0_low);
  out.y0_high = y0_high < 0.0 ? one_decoy_y0_cap(r, s) : std::min(y0_high, 1.0);
  out.y0_high = std::max(out.y0_high, out.y0_low);
  constexpr int kGrid = 100;
  const double span = out.y0_high - out.y0_low;
  double worst_y1 = 1.0;
  for (int i = 0; i <= kGrid; ++i) {
    const double y0 = out.y0_low + span * i / kGrid;
    worst_y1 = std::min(worst_y1, one_decoy_y1_lower(r, s, y0).value);
  }
  double worst_e1 = 0.0;
  for (int i = 0; i <= kGrid; ++i) {
    const double y0 = out.y0_low + span * i / kGrid;
    worst_e1 = std::max(worst_e1, one_decoy_e1_upper(r, s, y0, worst_y1));
  }
  out.y1 = worst_y1;
  out.e1 = worst_e1;
  return out;
}

// Secure fraction given single-photon bounds: the standard asymptotic rate
//   R = p_mu { mu e^{-mu} Y1 [1 - h(e1)] - f h(E_mu) Q_mu },
// floored at zero.
inline double key_rate_from_bounds(const ObservedRates& r, const SourceParams& s, double y1,
                                   double e1, double f) {
  const double q1 = s.mu * std::exp(-s.mu) * y1;
  const double rate =
      s.p_mu * (q1 * (1.0 - binary_entropy(e1)) - f * binary_entropy(r.e_mu()) * r.q_mu);
  return std::max(rate, 0.0);
}

inline double one_decoy_key_rate(const ObservedRates& r, const SourceParams& s, double f) {
  const OneDecoyBounds b = one_decoy_bounds(r, s);
  return key_rate_from_bounds(r, s, b.y1, b.e1, f);
}

// Vacuum+weak: the vacuum decoy pins the background yield, collapsing the
// interval to a point.
inline double vacuum_weak_key_rate(const ObservedRates& r, const SourceParams& s, double y0,
                                   double f) {
  const OneDecoyBounds b = one_decoy_bounds(r, s, y0, y0);
  return key_rate_from_bounds(r, s, b.y1, b.e1, f);
}

inline double infinite_decoy_key_rate(const ObservedRates& r, const SourceParams& s,
                                      const ChannelParams& ch, double distance_km, double f,
                                      bool complement_transmittance = false) {
  const SinglePhotonPoint p = infinite_decoy_reference(ch, distance_km, complement_transmittance);
  return key_rate_from_bounds(r, s, p.y1, p.e1, f);
}

// Joint solution of the gain and error-gain equations when only the one- and
// two-photon channels contribute (background and higher orders zeroed).
// These are the values an adversary limited to those channels must take, and
// the tangency point the improved bound uses.
struct TwoPhotonSolution {
  double y1 = 0.0;
  double e1 = 0.0;
  double y2 = 0.0;
  double e2 = 0.0;
  double e1y1 = 0.0;
  double e2y2 = 0.0;
  bool ok = false;               // y1 > 0 so e1 is well defined
  bool e2_indeterminate = false; // y2 = 0 leaves e2 undefined
};

inline TwoPhotonSolution two_photon_solution(const ObservedRates& r, const SourceParams& s) {
  const double mu = s.mu, nu = s.nu;
  const double emu = std::exp(mu), enu = std::exp(nu);
  const double den = mu * nu * (mu - nu);
  TwoPhotonSolution out;
  out.y1 = (mu * mu * r.q_nu * enu - nu * nu * r.q_mu * emu) / den;
  out.e1y1 = (mu * mu * r.eq_nu * enu - nu * nu * r.eq_mu * emu) / den;
  out.y2 = 2.0 * (nu * r.q_mu * emu - mu * r.q_nu * enu) / den;
  out.e2y2 = 2.0 * (nu * r.eq_mu * emu - mu * r.eq_nu * enu) / den;
  out.ok = out.y1 > 0.0;
  if (out.ok) out.e1 = out.e1y1 / out.y1;
  if (out.y2 > 0.0)
    out.e2 = out.e2y2 / out.y2;
  else
    out.e2_indeterminate = true;
  return out;
}

// Lower bound on Y1 [1 - h(e1)] using the tangent line to fold yield and
// error information from both intensities into one linear combination.
// Valid whenever feasibility_margin(line, mu, nu) >= 0.
inline double improved_bound(const ObservedRates& r, const SourceParams& s,
                             const TangentLine& line) {
  const double mu = s.mu, nu = s.nu;
  const double emu = std::exp(mu), enu = std::exp(nu);
  const double a = line.intercept, b = line.slope;
  const double c1 = mu * mu * r.q_nu * enu - nu * nu * r.q_mu * emu;
  const double c2 = mu * mu * r.eq_nu * enu - nu * nu * r.eq_mu * emu;
  const double cross = nu * r.eq_mu * emu - mu * r.eq_nu * enu;
  return (a * c1 - b * c2 + (a - b) * nu * cross) / (mu * nu * (mu - nu));
}

// Identity check target: with the tangent placed at the two-photon solution's
// e1, the improved bound equals Y1 [1 - h(e1)] plus an explicit two-photon
// correction (nu/2) (1 + log2 e1) e2 Y2. Requires e1 in (0, 1).
inline double two_photon_corrected_value(const ObservedRates& r, const SourceParams& s) {
  const TwoPhotonSolution sol = two_photon_solution(r, s);
  const double correction =
      0.5 * s.nu * (1.0 + std::log2(sol.e1)) * sol.e2y2;
  return sol.y1 * (1.0 - binary_entropy(sol.e1)) + correction;
}

struct AsymptoticImproved {
  double rate = 0.0;
  double bound = 0.0;       // lower bound on Y1 [1 - h(e1)]
  double e_t = 0.0;         // tangency point used
  double correction = 0.0;  // two-photon correction at the natural tangency point
  bool shrunk = false;      // e_t pulled down to the feasibility cap
  bool floored = false;     // e_t raised to the minimum tangency point
};

inline AsymptoticImproved improved_key_rate(const ObservedRates& r, const SourceParams& s,
                                            double f) {
  AsymptoticImproved out;
  const TwoPhotonSolution sol = two_photon_solution(r, s);
  double et = sol.ok ? sol.e1 : 0.0;
  if (et >= 0.5) return out;  // single-photon errors saturated: no key
  const double cap = max_feasible_et(s.mu, s.nu) - 1e-6;
  if (et > cap) {
    et = cap;
    out.shrunk = true;
  }
  if (et < 1e-6) {
    et = 1e-6;
    out.floored = true;
  }
  out.e_t = et;
  const TangentLine line = tangent_at(et);
  out.bound = improved_bound(r, s, line);
  if (sol.ok && sol.e1 > 0.0 && sol.e1 < 1.0)
    out.correction = 0.5 * s.nu * (1.0 + std::log2(sol.e1)) * sol.e2y2;
  out.rate = key_rate_from_bounds(r, s, std::max(out.bound, 0.0), 0.0, f);
  return out;
}

// Channel configuration minimizing Y1 [1 - h(e1)] over all photon-number
// yield/error assignments consistent with the observed rates and a fixed
// background yield. At the optimum every multiphoton error rate saturates
// and yields fill greedily from high photon numbers down, leaving at most
// one fractional class; the remaining one- and two-photon values follow from
// the gain and error-gain equations.
struct EveConfig {
  double y0 = 0.0;
  int k0 = 0;                   // yields are 1 from this photon number up
  std::vector<double> yields;   // classes 0..k0 (beyond: 1)
  std::vector<double> errors;   // classes 0..k0 (beyond: 1)
  double y1 = 0.0, e1 = 0.0, y2 = 0.0, e2 = 0.0;
  bool feasible = false;
};

inline double eve_optimal_value(const EveConfig& c) {
  return c.feasible ? c.y1 * (1.0 - binary_entropy(c.e1)) : 0.0;
}

namespace detail {
// sum_{i=0}^{k-1} x^i / i!
inline double poisson_partial_sum(double x, int k) {
  double s = 0.0, term = 1.0;
  for (int i = 0; i < k; ++i) {
    s += term;
    term *= x / (i + 1);
  }
  return s;
}
}  // namespace detail

inline EveConfig eve_optimal_config(const ObservedRates& r, const SourceParams& s, double y0) {
  const double mu = s.mu, nu = s.nu;
  const double emu = std::exp(mu), enu = std::exp(nu);
  EveConfig cfg;
  cfg.y0 = y0;

  // Budget the intensity difference leaves for error mass above two photons.
  const double rhs = r.eq_mu * emu / mu - r.eq_nu * enu / nu +
                     (mu - nu) / (2.0 * mu * nu) * y0;
  if (rhs < 0.0) return cfg;  // no channel reproduces the observations

  // tail(k) = sum_{i>=k} (mu^{i-1} - nu^{i-1}) / i!
  auto tail = [&](int k) {
    return (emu - detail::poisson_partial_sum(mu, k)) / mu -
           (enu - detail::poisson_partial_sum(nu, k)) / nu;
  };

  int k0 = 3;
  while (k0 < 400 && tail(k0) > rhs) ++k0;
  cfg.k0 = k0;
  if (tail(k0) > rhs) return cfg;  // no admissible truncation: signal infeasible

  // Fractional class just below k0 absorbs the leftover budget.
  double y_frac = 0.0;
  const int j = k0 - 1;
  if (k0 > 3) {
    const double t_j =
        (std::pow(mu, j - 1) - std::pow(nu, j - 1)) / std::tgamma(j + 1.0);
    y_frac = (rhs - tail(k0)) / t_j;
  }

  // Multiphoton contributions to the gain equations (errors saturated, so
  // the error-gain contributions coincide).
  auto high_mass = [&](double x, double ex) {
    double m = ex - detail::poisson_partial_sum(x, k0);
    if (k0 > 3) m += std::pow(x, j) / std::tgamma(j + 1.0) * y_frac;
    return m;
  };
  const double s_mu = high_mass(mu, emu);
  const double s_nu = high_mass(nu, enu);

  // Remaining 2x2 systems for (Y1, Y2) and (e1 Y1, e2 Y2).
  const double g_mu = r.q_mu * emu - y0 - s_mu;
  const double g_nu = r.q_nu * enu - y0 - s_nu;
  const double h_mu = r.eq_mu * emu - kVacuumErrorRate * y0 - s_mu;
  const double h_nu = r.eq_nu * enu - kVacuumErrorRate * y0 - s_nu;
  const double den = mu * nu * (mu - nu);
  const double y1 = (mu * mu * g_nu - nu * nu * g_mu) / den;
  const double y2 = 2.0 * (nu * g_mu - mu * g_nu) / den;
  const double e1y1 = (mu * mu * h_nu - nu * nu * h_mu) / den;
  const double e2y2 = 2.0 * (nu * h_mu - mu * h_nu) / den;

  const double tol = 1e-9;
  cfg.y1 = y1;
  cfg.y2 = y2;
  if (y1 > 0.0) cfg.e1 = e1y1 / y1;
  if (y2 > tol) cfg.e2 = e2y2 / y2;
  cfg.feasible = y1 >= -tol && y1 <= 1.0 + tol && y2 >= -tol && y2 <= 1.0 + tol &&
                 e1y1 >= -tol && e1y1 <= y1 + tol && e2y2 >= -tol && e2y2 <= y2 + tol &&
                 y_frac >= -tol && y_frac <= 1.0 + tol;
  if (!cfg.feasible) return cfg;

  cfg.yields.assign(k0 + 1, 0.0);
  cfg.errors.assign(k0 + 1, 1.0);
  cfg.yields[0] = y0;
  cfg.errors[0] = kVacuumErrorRate;
  cfg.yields[1] = std::clamp(y1, 0.0, 1.0);
  cfg.errors[1] = std::clamp(cfg.e1, 0.0, 1.0);
  cfg.yields[2] = std::clamp(y2, 0.0, 1.0);
  cfg.errors[2] = std::clamp(cfg.e2, 0.0, 1.0);
  if (k0 > 3) cfg.yields[j] = std::clamp(y_frac, 0.0, 1.0);
  cfg.yields[k0] = 1.0;
  return cfg;
}

}  // namespace decoyrate
