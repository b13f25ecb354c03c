#pragma once

#include <cmath>
#include <stdexcept>

namespace decoyrate {

// Error rate of background (dark/stray) clicks.
inline constexpr double kVacuumErrorRate = 0.5;

// Signal intensity mu, decoy intensity nu, and the fraction of pulses sent at
// each setting. p_vac > 0 means a vacuum decoy is also emitted.
struct SourceParams {
  double mu = 0.6;
  double nu = 0.2;
  double p_mu = 6.0 / 7.0;
  double p_nu = 1.0 / 7.0;
  double p_vac = 0.0;

  void validate() const {
    if (!(mu > nu && nu > 0.0))
      throw std::invalid_argument("source: need mu > nu > 0");
    if (!(p_mu > 0.0 && p_nu > 0.0 && p_vac >= 0.0))
      throw std::invalid_argument("source: pulse fractions must be positive");
    if (std::fabs(p_mu + p_nu + p_vac - 1.0) > 1e-9)
      throw std::invalid_argument("source: pulse fractions must sum to 1");
  }
};

// Fiber + detector model. eta_det is folded into the end-to-end
// transmittance; y0 is the background yield (click probability with no
// photons arriving), e_d the misalignment error probability.
struct ChannelParams {
  double eta_det = 0.72;
  double alpha_db_per_km = 0.21;
  double e_d = 0.015;
  double y0 = 3e-8;

  void validate() const {
    if (!(eta_det > 0.0 && eta_det <= 1.0))
      throw std::invalid_argument("channel: eta_det outside (0, 1]");
    if (!(alpha_db_per_km >= 0.0))
      throw std::invalid_argument("channel: negative attenuation");
    if (!(e_d >= 0.0 && e_d < 0.5))
      throw std::invalid_argument("channel: e_d outside [0, 0.5)");
    if (!(y0 >= 0.0 && y0 < 1.0))
      throw std::invalid_argument("channel: y0 outside [0, 1)");
  }
};

inline double channel_transmittance(const ChannelParams& ch, double distance_km) {
  if (!(distance_km >= 0.0))
    throw std::invalid_argument("channel: negative distance");
  return ch.eta_det * std::pow(10.0, -ch.alpha_db_per_km * distance_km / 10.0);
}

// Gains (click probability per pulse) and error-gains (error probability per
// pulse, i.e. E*Q) for the two intensities, plus the vacuum-pulse gain.
struct ObservedRates {
  double q_mu = 0.0;
  double q_nu = 0.0;
  double eq_mu = 0.0;
  double eq_nu = 0.0;
  double q_vac = 0.0;

  double e_mu() const { return q_mu > 0.0 ? eq_mu / q_mu : 0.0; }
  double e_nu() const { return q_nu > 0.0 ? eq_nu / q_nu : 0.0; }
};

inline ObservedRates simulate_rates(const SourceParams& s, const ChannelParams& ch,
                                    double distance_km) {
  s.validate();
  ch.validate();
  const double eta = channel_transmittance(ch, distance_km);
  ObservedRates r;
  r.q_mu = 1.0 - (1.0 - ch.y0) * std::exp(-s.mu * eta);
  r.q_nu = 1.0 - (1.0 - ch.y0) * std::exp(-s.nu * eta);
  r.eq_mu = kVacuumErrorRate * ch.y0 + ch.e_d * (1.0 - std::exp(-s.mu * eta));
  r.eq_nu = kVacuumErrorRate * ch.y0 + ch.e_d * (1.0 - std::exp(-s.nu * eta));
  r.q_vac = ch.y0;
  return r;
}

inline double poisson_pmf(double intensity, int k) {
  if (!(intensity >= 0.0) || k < 0)
    throw std::invalid_argument("poisson_pmf: bad arguments");
  if (intensity == 0.0) return k == 0 ? 1.0 : 0.0;
  return std::exp(k * std::log(intensity) - intensity - std::lgamma(k + 1.0));
}

// Smallest k with Poisson tail mass beyond class k below 1e-15; photon-number
// tallies fold whatever is left into the top class.
inline int poisson_truncation(double intensity) {
  double cum = 0.0;
  for (int k = 0; k < 200; ++k) {
    cum += poisson_pmf(intensity, k);
    if (1.0 - cum < 1e-15) return k;
  }
  return 200;
}

// Probability that a pulse known to carry k photons came from the signal
// (mu) setting rather than the decoy (nu) setting. Vacuum-decoy pulses never
// carry photons for k >= 1 and are excluded from this two-way split.
inline double conditional_intensity_probability(const SourceParams& s, int k) {
  const double a = s.p_mu * poisson_pmf(s.mu, k);
  const double b = s.p_nu * poisson_pmf(s.nu, k);
  if (a + b <= 0.0) return 0.0;
  return a / (a + b);
}

// Pulse and click tallies for one acquisition block. Real-valued so expected
// (fractional) counts and sampled integer counts share a representation.
struct FiniteCounts {
  double N = 0.0;                    // total pulses
  double N_mu = 0.0, N_nu = 0.0;     // pulses per intensity
  double n_mu = 0.0, n_nu = 0.0;     // clicks
  double m_mu = 0.0, m_nu = 0.0;     // erroneous clicks
  double N_vac = 0.0, n_vac = 0.0;   // vacuum-decoy tallies
  bool has_vacuum = false;

  double c_mu() const { return n_mu - m_mu; }  // correct clicks
  double c_nu() const { return n_nu - m_nu; }

  void validate() const {
    auto block = [](double N_set, double n, double m) {
      return N_set >= 0.0 && n >= 0.0 && m >= 0.0 && m <= n + 1e-9 && n <= N_set + 1e-9;
    };
    if (!(N > 0.0) || !block(N_mu, n_mu, m_mu) || !block(N_nu, n_nu, m_nu) ||
        !block(N_vac, n_vac, 0.0) || n_vac > N_vac + 1e-9)
      throw std::invalid_argument("counts: inconsistent tallies");
    if (std::fabs(N_mu + N_nu + N_vac - N) > 1e-6 * N)
      throw std::invalid_argument("counts: pulse totals do not add up");
  }
};

inline FiniteCounts expected_counts(const SourceParams& s, const ObservedRates& r, double N) {
  s.validate();
  if (!(N > 0.0)) throw std::invalid_argument("expected_counts: N must be positive");
  FiniteCounts c;
  c.N = N;
  c.N_mu = s.p_mu * N;
  c.N_nu = s.p_nu * N;
  c.n_mu = c.N_mu * r.q_mu;
  c.n_nu = c.N_nu * r.q_nu;
  c.m_mu = c.N_mu * r.eq_mu;
  c.m_nu = c.N_nu * r.eq_nu;
  if (s.p_vac > 0.0) {
    c.N_vac = s.p_vac * N;
    c.n_vac = c.N_vac * r.q_vac;
    c.has_vacuum = true;
  }
  return c;
}

// Single-photon yield and error rate when arbitrarily many decoy settings
// pin them down exactly. complement_transmittance reproduces the variant
// that weights the single-photon channel by (1 - eta) instead of eta; it is
// kept for output comparisons only and disagrees with the distance curves
// this model produces.
struct SinglePhotonPoint {
  double y1 = 0.0;
  double e1 = 0.0;
};

inline SinglePhotonPoint infinite_decoy_reference(const ChannelParams& ch, double distance_km,
                                                  bool complement_transmittance = false) {
  ch.validate();
  const double eta = channel_transmittance(ch, distance_km);
  const double w = complement_transmittance ? 1.0 - eta : eta;
  SinglePhotonPoint p;
  p.y1 = ch.y0 + (1.0 - ch.y0) * w;
  const double e1y1 = kVacuumErrorRate * ch.y0 + ch.e_d * (1.0 - ch.y0) * w;
  p.e1 = p.y1 > 0.0 ? e1y1 / p.y1 : 0.0;
  return p;
}

}  // namespace decoyrate
