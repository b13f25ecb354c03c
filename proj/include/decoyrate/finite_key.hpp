#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "decoyrate/asymptotic.hpp"
#include "decoyrate/channel.hpp"
#include "decoyrate/chernoff.hpp"
#include "decoyrate/entropy.hpp"

namespace decoyrate {

enum class FiniteStatus {
  Ok,
  NoSinglePhotonSignal,  // empirical tangency denominator not positive
  VacuousStatistics,     // too few counts for any non-vacuous deviation route
};

inline const char* to_string(FiniteStatus s) {
  switch (s) {
    case FiniteStatus::Ok: return "ok";
    case FiniteStatus::NoSinglePhotonSignal: return "no-single-photon-signal";
    case FiniteStatus::VacuousStatistics: return "insufficient-decoy-statistics";
  }
  return "unknown";
}

struct FiniteKeyOptions {
  // Error-count term coefficient: derivation-consistent mu(mu-nu) by default;
  // true switches to the looser (mu^2 - nu^2) variant kept for output
  // comparisons. Only the default reduces exactly to the asymptotic bound as
  // the deviations vanish.
  bool wide_error_coefficient = false;
  // Known-expectation deviation: exact root by default; true uses the
  // shortcut form that understates it.
  bool reproduction_delta_n = false;
  // Each Chernoff-bounded term admits two decompositions (estimate the
  // nu-side count directly, or route through the mu-side). Default keeps the
  // nu-side route, falling back to the other only when it is vacuous; true
  // always picks the tighter of the two.
  bool best_decomposition = false;
  // Multiplies every deviation before use. Validation harness hook: scaling
  // up makes the bounds strictly more conservative; never set below 1 in
  // production use.
  double delta_scale = 1.0;
  DeltaPolicy improved_policy{100.0};
  DeltaPolicy baseline_policy{6.0};
};

namespace detail {

inline Deviation scale_deviation(Deviation d, double scale) {
  if (scale == 1.0) return d;
  if (!(scale >= 0.0)) throw std::invalid_argument("delta_scale must be nonnegative");
  d.delta_minus *= scale;
  d.delta_plus = std::min(d.delta_plus * scale, 1.0 - 1e-12);
  return d;
}

}  // namespace detail

// Tangency point estimated from the empirical per-pulse frequencies; the
// ratio of the error-side to the yield-side linear combination:
//
//   e = [mu^2 (m_nu/N_nu) e^nu - nu^2 (m_mu/N_mu) e^mu]
//       / [mu^2 (n_nu/N_nu) e^nu - nu^2 (n_mu/N_mu) e^mu]
//
// clipped into the feasible tangency range.
struct EmpiricalTangent {
  TangentLine line{};
  double e_raw = 0.0;
  bool ok = true;
  bool shrunk = false;
  bool floored = false;
};

inline EmpiricalTangent empirical_tangent(const FiniteCounts& c, const SourceParams& s) {
  const double mu = s.mu, nu = s.nu;
  const double emu = std::exp(mu), enu = std::exp(nu);
  EmpiricalTangent t;
  const double den = mu * mu * (c.n_nu / c.N_nu) * enu - nu * nu * (c.n_mu / c.N_mu) * emu;
  if (!(den > 0.0)) {
    t.ok = false;
    return t;
  }
  const double num = mu * mu * (c.m_nu / c.N_nu) * enu - nu * nu * (c.m_mu / c.N_mu) * emu;
  double e = num / den;
  t.e_raw = e;
  const double cap = max_feasible_et(mu, nu) - 1e-6;
  if (e > cap) {
    e = cap;
    t.shrunk = true;
  }
  if (e < 1e-6) {
    e = 1e-6;
    t.floored = true;
  }
  t.line = tangent_at(e);
  return t;
}

struct FiniteKeyResult {
  double rate = 0.0;
  double bound = 0.0;        // lower bound on Y1 [1 - h(e1)]; kept unclamped
  double n_mu1_lower = 0.0;  // lower bound on single-photon pulses in the mu set
  double delta_n = 0.0, delta_1 = 0.0, delta_2 = 0.0;
  TangentLine tangent{};
  double epsilon_total = 0.0;
  FiniteStatus status = FiniteStatus::Ok;
  bool degenerate_vacuum = false;
  bool used_alternate_t1 = false;
  bool used_alternate_t2 = false;
};

// Finite-statistics version of the improved estimator. Counts fluctuate
// jointly: the two error tallies share one deviation bound and the two
// correct-click tallies share another, instead of four independent
// worst-case corners; a third (known-expectation) deviation covers the
// number of single-photon signal pulses. Total failure budget 3 epsilon.
inline FiniteKeyResult finite_improved_rate(const FiniteCounts& c, const SourceParams& s,
                                            double f, double eps,
                                            const FiniteKeyOptions& opt = {}) {
  c.validate();
  s.validate();
  const double mu = s.mu, nu = s.nu;
  const double emu = std::exp(mu), enu = std::exp(nu);
  constexpr double kInf = std::numeric_limits<double>::infinity();

  FiniteKeyResult res;
  res.epsilon_total = 3.0 * eps;

  const EmpiricalTangent t = empirical_tangent(c, s);
  res.tangent = t.line;
  if (!t.ok) {
    res.status = FiniteStatus::NoSinglePhotonSignal;
    return res;
  }
  const double a = t.line.intercept, b = t.line.slope;  // b > a for e_t < 1/2

  const double coef = opt.wide_error_coefficient ? (mu * mu - nu * nu) : mu * (mu - nu);
  const double k1 = (b - a) * (enu / c.N_nu) * coef;  // weight of the error-count term
  const double cap_s = mu * mu * enu / c.N_nu + nu * nu * emu / c.N_mu;
  const double beta = (nu * nu * emu / c.N_mu) / cap_s;

  // Error-side term: -k1 * E[nu-share of errors], overestimated.
  double t1 = -kInf;
  {
    const Deviation d =
        detail::scale_deviation(solve_delta(c.m_nu, eps, opt.improved_policy), opt.delta_scale);
    if (!d.plus_vacuous) {
      t1 = -k1 * c.m_nu / (1.0 - d.delta_plus);
      res.delta_1 = d.delta_plus;
    }
  }
  if (opt.best_decomposition || t1 == -kInf) {
    const Deviation d =
        detail::scale_deviation(solve_delta(c.m_mu, eps, opt.improved_policy), opt.delta_scale);
    if (!d.minus_vacuous) {
      const double alt = k1 * (c.m_mu / (1.0 + d.delta_minus) - c.m_mu - c.m_nu);
      if (alt > t1) {
        t1 = alt;
        res.delta_1 = d.delta_minus;
        res.used_alternate_t1 = true;
      }
    }
  }

  // Correct-click term: underestimate the nu-share of correct clicks against
  // the mixture weight beta.
  double t2 = -kInf;
  {
    const Deviation d = detail::scale_deviation(solve_delta(c.c_nu(), eps, opt.improved_policy),
                                                opt.delta_scale);
    if (!d.minus_vacuous) {
      t2 = a * cap_s * (c.c_nu() / (1.0 + d.delta_minus) - beta * (c.c_mu() + c.c_nu()));
      res.delta_2 = d.delta_minus;
    }
  }
  if (opt.best_decomposition || t2 == -kInf) {
    const Deviation d = detail::scale_deviation(solve_delta(c.c_mu(), eps, opt.improved_policy),
                                                opt.delta_scale);
    if (!d.plus_vacuous) {
      const double alt =
          a * cap_s * ((1.0 - beta) * (c.c_mu() + c.c_nu()) - c.c_mu() / (1.0 - d.delta_plus));
      if (alt > t2) {
        t2 = alt;
        res.delta_2 = d.delta_plus;
        res.used_alternate_t2 = true;
      }
    }
  }

  if (t1 == -kInf || t2 == -kInf) {
    res.status = FiniteStatus::VacuousStatistics;
    return res;
  }

  res.bound = (t1 + t2) / (mu * nu * (mu - nu));

  const double expected_mu1 = c.N_mu * mu * std::exp(-mu);
  res.delta_n = opt.delta_scale *
                solve_delta_known_expectation(expected_mu1, eps,
                                              opt.reproduction_delta_n
                                                  ? KnownExpectationForm::Reproduction
                                                  : KnownExpectationForm::Exact);
  res.n_mu1_lower = expected_mu1 / (1.0 + res.delta_n);

  const double e_meas = c.n_mu > 0.0 ? c.m_mu / c.n_mu : 0.0;
  const double ec = f * binary_entropy(std::min(e_meas, 1.0)) * c.n_mu / c.N;
  res.rate = std::max(0.0, res.n_mu1_lower * std::max(res.bound, 0.0) / c.N - ec);
  return res;
}

namespace detail {

// Adversarial per-pulse rates for the baseline estimators: every observable
// pushed one deviation in the direction that hurts the key rate (gain of the
// signal up, gain of the decoy down, both error-gains up). Vacuous upper
// estimates become +inf; the downstream formulas saturate them at their
// structural caps.
inline ObservedRates baseline_adversarial_rates(const FiniteCounts& c, const SourceParams& s,
                                                double eps, const FiniteKeyOptions& opt) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const Deviation dn_mu =
      scale_deviation(solve_delta(c.n_mu, eps, opt.baseline_policy), opt.delta_scale);
  const Deviation dn_nu =
      scale_deviation(solve_delta(c.n_nu, eps, opt.baseline_policy), opt.delta_scale);
  const Deviation dm_mu =
      scale_deviation(solve_delta(c.m_mu, eps, opt.baseline_policy), opt.delta_scale);
  const Deviation dm_nu =
      scale_deviation(solve_delta(c.m_nu, eps, opt.baseline_policy), opt.delta_scale);
  ObservedRates adv;
  adv.q_mu = dn_mu.plus_vacuous ? 1.0
                                : std::min(1.0, (c.n_mu / c.N_mu) / (1.0 - dn_mu.delta_plus));
  adv.q_nu = dn_nu.minus_vacuous ? 0.0 : (c.n_nu / c.N_nu) / (1.0 + dn_nu.delta_minus);
  adv.eq_mu = dm_mu.plus_vacuous ? kInf : (c.m_mu / c.N_mu) / (1.0 - dm_mu.delta_plus);
  adv.eq_nu = dm_nu.plus_vacuous ? kInf : (c.m_nu / c.N_nu) / (1.0 - dm_nu.delta_plus);
  return adv;
}

inline double baseline_rate_from_bounds(const FiniteCounts& c, const SourceParams& s,
                                        const OneDecoyBounds& b, double f) {
  const double e_meas = c.n_mu > 0.0 ? std::min(c.m_mu / c.n_mu, 1.0) : 0.0;
  const double rate = (c.N_mu / c.N) * s.mu * std::exp(-s.mu) * b.y1 *
                          (1.0 - binary_entropy(b.e1)) -
                      f * binary_entropy(e_meas) * c.n_mu / c.N;
  return std::max(rate, 0.0);
}

}  // namespace detail

// Baseline: the one-decoy estimator with every observable independently at
// its Chernoff worst case. Failure budget 4 epsilon.
inline FiniteKeyResult finite_one_decoy_rate(const FiniteCounts& c, const SourceParams& s,
                                             double f, double eps,
                                             const FiniteKeyOptions& opt = {}) {
  c.validate();
  s.validate();
  FiniteKeyResult res;
  res.epsilon_total = 4.0 * eps;
  const ObservedRates adv = detail::baseline_adversarial_rates(c, s, eps, opt);
  const OneDecoyBounds b = one_decoy_bounds(adv, s);
  res.bound = b.y1 * (1.0 - binary_entropy(b.e1));
  res.n_mu1_lower = c.N_mu * s.mu * std::exp(-s.mu);
  res.rate = detail::baseline_rate_from_bounds(c, s, b, f);
  return res;
}

// Baseline: vacuum+weak. The vacuum decoy's clicks give a two-sided
// background-yield interval (epsilon/2 per side); the rest matches the
// one-decoy treatment. When the vacuum statistics cannot support any upper
// estimate the interval degenerates to the one-decoy cap. Failure budget
// 5 epsilon total.
inline FiniteKeyResult finite_vacuum_weak_rate(const FiniteCounts& c, const SourceParams& s,
                                               double f, double eps,
                                               const FiniteKeyOptions& opt = {}) {
  c.validate();
  s.validate();
  if (!c.has_vacuum || !(c.N_vac > 0.0))
    throw std::invalid_argument("vacuum+weak estimator requires vacuum-decoy tallies");
  FiniteKeyResult res;
  res.epsilon_total = 5.0 * eps;
  const ObservedRates adv = detail::baseline_adversarial_rates(c, s, eps, opt);
  const Deviation dvac = detail::scale_deviation(
      solve_delta(c.n_vac, eps / 2.0, opt.baseline_policy), opt.delta_scale);
  const double cap = one_decoy_y0_cap(adv, s);
  double y0_low = 0.0, y0_high = cap;
  if (dvac.plus_vacuous) {
    res.degenerate_vacuum = true;
  } else {
    y0_high = std::min(cap, (c.n_vac / c.N_vac) / (1.0 - dvac.delta_plus));
    if (!dvac.minus_vacuous)
      y0_low = std::min((c.n_vac / c.N_vac) / (1.0 + dvac.delta_minus), y0_high);
  }
  const OneDecoyBounds b = one_decoy_bounds(adv, s, y0_low, y0_high);
  res.bound = b.y1 * (1.0 - binary_entropy(b.e1));
  res.n_mu1_lower = c.N_mu * s.mu * std::exp(-s.mu);
  res.rate = detail::baseline_rate_from_bounds(c, s, b, f);
  return res;
}

enum class Method { OneDecoy, VacuumWeak, Improved, InfiniteDecoy };

// Everything needed to evaluate any method at any distance. The vacuum+weak
// finite estimator runs on its own source (it needs a vacuum fraction); its
// asymptotic counterpart and all other methods use the main source.
struct RateContext {
  SourceParams source{};
  SourceParams vw_source{0.6, 0.2, 0.75, 0.125, 0.125};
  ChannelParams channel{};
  double f = 1.06;
  double epsilon = 1e-10;
  FiniteKeyOptions options{};
  bool complement_transmittance = false;
};

// Key rate for one method at one distance; N <= 0 selects the asymptotic
// (infinite acquisition) limit.
inline double key_rate_at(const RateContext& ctx, Method m, double distance_km, double N) {
  const bool asymptotic = !(N > 0.0);
  switch (m) {
    case Method::InfiniteDecoy: {
      const ObservedRates r = simulate_rates(ctx.source, ctx.channel, distance_km);
      return infinite_decoy_key_rate(r, ctx.source, ctx.channel, distance_km, ctx.f,
                                     ctx.complement_transmittance);
    }
    case Method::OneDecoy: {
      const ObservedRates r = simulate_rates(ctx.source, ctx.channel, distance_km);
      if (asymptotic) return one_decoy_key_rate(r, ctx.source, ctx.f);
      const FiniteCounts c = expected_counts(ctx.source, r, N);
      return finite_one_decoy_rate(c, ctx.source, ctx.f, ctx.epsilon, ctx.options).rate;
    }
    case Method::VacuumWeak: {
      if (asymptotic) {
        const ObservedRates r = simulate_rates(ctx.source, ctx.channel, distance_km);
        return vacuum_weak_key_rate(r, ctx.source, ctx.channel.y0, ctx.f);
      }
      const ObservedRates r = simulate_rates(ctx.vw_source, ctx.channel, distance_km);
      const FiniteCounts c = expected_counts(ctx.vw_source, r, N);
      return finite_vacuum_weak_rate(c, ctx.vw_source, ctx.f, ctx.epsilon, ctx.options).rate;
    }
    case Method::Improved: {
      const ObservedRates r = simulate_rates(ctx.source, ctx.channel, distance_km);
      if (asymptotic) return improved_key_rate(r, ctx.source, ctx.f).rate;
      const FiniteCounts c = expected_counts(ctx.source, r, N);
      return finite_improved_rate(c, ctx.source, ctx.f, ctx.epsilon, ctx.options).rate;
    }
  }
  throw std::invalid_argument("key_rate_at: unknown method");
}

// Largest distance (0.1 km resolution) with a positive key rate: geometric
// expansion to bracket the cutoff, bisection to below the resolution, then a
// linear walk on the decile grid to certify the reported point.
inline double max_distance(const RateContext& ctx, Method m, double N,
                           double hard_cap_km = 2000.0) {
  auto rate = [&](double l) { return key_rate_at(ctx, m, l, N); };
  if (!(rate(0.0) > 0.0)) return 0.0;
  double lo = 0.0, hi = 50.0;
  while (rate(hi) > 0.0) {
    lo = hi;
    hi += 50.0;
    if (hi >= hard_cap_km) return hard_cap_km;
  }
  while (hi - lo > 0.01) {
    const double mid = 0.5 * (lo + hi);
    (rate(mid) > 0.0 ? lo : hi) = mid;
  }
  long d = std::lround(std::floor(lo * 10.0));
  while (rate((d + 1) / 10.0) > 0.0) ++d;
  while (d > 0 && !(rate(d / 10.0) > 0.0)) --d;
  return d / 10.0;
}

}  // namespace decoyrate
