#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "decoyrate/channel.hpp"
#include "decoyrate/finite_key.hpp"

namespace decoyrate {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent, reproducible engine per (seed, stream index): trial i always
// sees the same randomness no matter how many trials run or in what order.
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t index) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ (index + 1)));
}

// One realized transmission block, tallied per photon number: how many
// pulses carried k photons, how many of those clicked, and how many clicked
// wrongly. The per-photon-number yields/errors are the model consistent with
// the aggregate gain and error-gain formulas.
struct PhotonChannelTruth {
  SourceParams source{};
  double N = 0.0;
  int k_max = 0;
  std::vector<double> yields, errors;
  std::vector<std::int64_t> emitted, clicks, error_clicks;

  // Mixture probability that a pulse carries k photons (top class absorbs
  // the truncated tail).
  double mix_prob(int k) const {
    double p = source.p_mu * poisson_pmf(source.mu, k) +
               source.p_nu * poisson_pmf(source.nu, k);
    return p;
  }

  // Effective single-photon quantities realized in this block; the target
  // every estimate must stay below.
  double realized_value() const {
    if (clicks[1] <= 0) return 0.0;
    const double y1 = clicks[1] / (N * mix_prob(1));
    const double e1 = static_cast<double>(error_clicks[1]) / clicks[1];
    return y1 * (1.0 - binary_entropy(std::min(e1, 1.0)));
  }
};

namespace detail {

inline std::int64_t draw_binomial(std::mt19937_64& eng, std::int64_t n, double p) {
  if (n <= 0 || p <= 0.0) return 0;
  if (p >= 1.0) return n;
  return std::binomial_distribution<std::int64_t>(n, p)(eng);
}

}  // namespace detail

inline PhotonChannelTruth build_truth(const SourceParams& s, const ChannelParams& ch,
                                      double distance_km, double N, std::uint64_t seed) {
  s.validate();
  ch.validate();
  if (s.p_vac != 0.0)
    throw std::invalid_argument("build_truth: vacuum-decoy sources not supported here");
  if (!(N >= 1.0) || N > 9e15 || N != std::floor(N))
    throw std::invalid_argument("build_truth: N must be a (not too large) whole number");
  const double eta = channel_transmittance(ch, distance_km);

  PhotonChannelTruth t;
  t.source = s;
  t.N = N;
  t.k_max = std::max(poisson_truncation(s.mu), poisson_truncation(s.nu));
  const int n_cls = t.k_max + 1;
  t.yields.resize(n_cls);
  t.errors.resize(n_cls);
  for (int k = 0; k < n_cls; ++k) {
    // y0 + (1 - y0)(1 - (1-eta)^k), arranged so small y0 survives rounding.
    const double y = ch.y0 + (1.0 - ch.y0) * (1.0 - std::pow(1.0 - eta, k));
    t.yields[k] = y;
    t.errors[k] =
        y > 0.0 ? (kVacuumErrorRate * ch.y0 + ch.e_d * (y - ch.y0)) / y : kVacuumErrorRate;
  }

  // Multinomial split of the N pulses over photon-number classes via
  // sequential conditional binomials; the top class keeps the remainder
  // (tail mass below 1e-15 by construction of k_max).
  std::mt19937_64 eng = substream(seed, 0);
  t.emitted.assign(n_cls, 0);
  t.clicks.assign(n_cls, 0);
  t.error_clicks.assign(n_cls, 0);
  std::int64_t remaining = static_cast<std::int64_t>(N);
  double mass_left = 1.0;
  for (int k = 0; k < n_cls - 1 && remaining > 0; ++k) {
    const double p = std::min(1.0, t.mix_prob(k) / mass_left);
    t.emitted[k] = detail::draw_binomial(eng, remaining, p);
    remaining -= t.emitted[k];
    mass_left = std::max(mass_left - t.mix_prob(k), 1e-300);
  }
  t.emitted[n_cls - 1] = remaining;
  for (int k = 0; k < n_cls; ++k) {
    t.clicks[k] = detail::draw_binomial(eng, t.emitted[k], t.yields[k]);
    t.error_clicks[k] = detail::draw_binomial(eng, t.clicks[k], t.errors[k]);
  }
  return t;
}

// Intensity labels are assigned per click: a click from a k-photon pulse
// belongs to the signal set with the conditional probability for k. The
// click record itself stays fixed; only the labeling resamples. Totals are
// conserved exactly by construction.
inline FiniteCounts sample_assignment(const PhotonChannelTruth& t, std::mt19937_64& eng) {
  FiniteCounts c;
  c.N = t.N;
  c.N_mu = std::round(t.source.p_mu * t.N);
  c.N_nu = t.N - c.N_mu;
  std::int64_t n_mu = 0, m_mu = 0, n_all = 0, m_all = 0;
  for (std::size_t k = 0; k < t.clicks.size(); ++k) {
    const double p = conditional_intensity_probability(t.source, static_cast<int>(k));
    const std::int64_t err_mu = detail::draw_binomial(eng, t.error_clicks[k], p);
    const std::int64_t ok_mu =
        detail::draw_binomial(eng, t.clicks[k] - t.error_clicks[k], p);
    n_mu += err_mu + ok_mu;
    m_mu += err_mu;
    n_all += t.clicks[k];
    m_all += t.error_clicks[k];
  }
  c.n_mu = static_cast<double>(n_mu);
  c.m_mu = static_cast<double>(m_mu);
  c.n_nu = static_cast<double>(n_all - n_mu);
  c.m_nu = static_cast<double>(m_all - m_mu);
  return c;
}

struct TrialOutcome {
  FiniteCounts counts{};
  double bound = 0.0;          // estimated lower bound on Y1 [1 - h(e1)]
  double n_mu1_bound = 0.0;    // estimated lower bound on mu-set single-photon pulses
  std::int64_t n_mu1 = 0;      // realized mu-set single-photon pulses
  bool violated_yield = false;
  bool violated_count = false;
  bool violated = false;
};

struct ValidationSummary {
  std::int64_t trials = 0;
  std::int64_t violations_yield = 0;
  std::int64_t violations_count = 0;
  std::int64_t violations_any = 0;
  double fraction = 0.0;
  double wilson_low = 0.0, wilson_high = 0.0;  // 95% interval for the fraction
  double epsilon = 0.0;
  double budget = 0.0;       // advertised failure probability, 3 epsilon
  double realized_value = 0.0;
  double mean_rate = 0.0;
};

inline std::pair<double, double> wilson_interval(double successes, double n,
                                                 double z = 1.959963984540054) {
  if (!(n > 0.0)) return {0.0, 1.0};
  const double p = successes / n;
  const double z2n = z * z / n;
  const double center = (p + z2n / 2.0) / (1.0 + z2n);
  const double hw = z * std::sqrt(p * (1.0 - p) / n + z2n / (4.0 * n)) / (1.0 + z2n);
  // Clamping against p keeps the interval containing the point estimate even
  // when the center/half-width arithmetic rounds across it at the edges.
  return {std::clamp(center - hw, 0.0, p), std::clamp(center + hw, p, 1.0)};
}

// Repeatedly relabels the fixed click record, runs the finite-key estimator
// on each relabeling, and counts how often any leg of the guarantee fails:
// the yield-side bound exceeding the realized effective value, or the
// single-photon pulse-count bound exceeding the realized count. The observed
// failure fraction must stay within the advertised 3-epsilon budget.
inline ValidationSummary estimate_failure_rate(const PhotonChannelTruth& t, double f,
                                               double eps, std::int64_t trials,
                                               std::uint64_t seed,
                                               const FiniteKeyOptions& opt = {},
                                               std::vector<TrialOutcome>* capture = nullptr) {
  if (trials <= 0) throw std::invalid_argument("estimate_failure_rate: trials must be positive");
  ValidationSummary sum;
  sum.trials = trials;
  sum.epsilon = eps;
  sum.budget = 3.0 * eps;
  sum.realized_value = t.realized_value();
  const double p1 = conditional_intensity_probability(t.source, 1);
  double rate_acc = 0.0;
  for (std::int64_t i = 0; i < trials; ++i) {
    std::mt19937_64 eng = substream(seed, static_cast<std::uint64_t>(i) + 1);
    TrialOutcome o;
    o.counts = sample_assignment(t, eng);
    o.n_mu1 = detail::draw_binomial(eng, t.emitted[1], p1);
    const FiniteKeyResult res =
        finite_improved_rate(o.counts, t.source, f, eps, opt);
    o.bound = res.bound;
    o.n_mu1_bound = res.n_mu1_lower;
    o.violated_yield = res.status == FiniteStatus::Ok && res.bound > sum.realized_value;
    o.violated_count = res.n_mu1_lower > static_cast<double>(o.n_mu1);
    o.violated = o.violated_yield || o.violated_count;
    sum.violations_yield += o.violated_yield;
    sum.violations_count += o.violated_count;
    sum.violations_any += o.violated;
    rate_acc += res.rate;
    if (capture) capture->push_back(o);
  }
  sum.fraction = static_cast<double>(sum.violations_any) / static_cast<double>(trials);
  auto [lo, hi] = wilson_interval(static_cast<double>(sum.violations_any),
                                  static_cast<double>(trials));
  sum.wilson_low = lo;
  sum.wilson_high = hi;
  sum.mean_rate = rate_acc / static_cast<double>(trials);
  return sum;
}

}  // namespace decoyrate
