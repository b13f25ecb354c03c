#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "decoyrate/config.hpp"
#include "decoyrate/monte_carlo.hpp"

namespace decoyrate {

// Rates below this are indistinguishable from zero at our precision and are
// reported as exactly 0.
inline constexpr double kRateFloor = 1e-15;

struct ScanRow {
  double distance_km = 0.0;
  std::optional<double> rate_one_decoy, rate_vacuum_weak, rate_improved, rate_infinite;
  // Diagnostics from the improved estimator at this distance (zeros when it
  // is not selected).
  double e_t = 0.0;
  double delta_n = 0.0, delta_1 = 0.0, delta_2 = 0.0;
  double correction = 0.0;
};

namespace detail {

inline double floor_rate(double r) { return r < kRateFloor ? 0.0 : r; }

inline bool selected(const RunConfig& cfg, Method m) {
  for (Method x : cfg.methods)
    if (x == m) return true;
  return false;
}

}  // namespace detail

// One row per scan distance; N <= 0 evaluates the asymptotic limit.
inline std::vector<ScanRow> run_scan(const RunConfig& cfg, double N) {
  const RateContext ctx = cfg.context();
  std::vector<ScanRow> rows;
  for (double l = cfg.scan_start_km; l <= cfg.scan_stop_km + 1e-9; l += cfg.scan_step_km) {
    ScanRow row;
    row.distance_km = l;
    if (detail::selected(cfg, Method::OneDecoy))
      row.rate_one_decoy = detail::floor_rate(key_rate_at(ctx, Method::OneDecoy, l, N));
    if (detail::selected(cfg, Method::VacuumWeak))
      row.rate_vacuum_weak = detail::floor_rate(key_rate_at(ctx, Method::VacuumWeak, l, N));
    if (detail::selected(cfg, Method::Improved)) {
      const ObservedRates r = simulate_rates(ctx.source, ctx.channel, l);
      if (N > 0.0) {
        const FiniteCounts c = expected_counts(ctx.source, r, N);
        const FiniteKeyResult res =
            finite_improved_rate(c, ctx.source, ctx.f, ctx.epsilon, ctx.options);
        row.rate_improved = detail::floor_rate(res.rate);
        row.e_t = res.tangent.point;
        row.delta_n = res.delta_n;
        row.delta_1 = res.delta_1;
        row.delta_2 = res.delta_2;
        const AsymptoticImproved ai = improved_key_rate(r, ctx.source, ctx.f);
        row.correction = ai.correction;
      } else {
        const AsymptoticImproved ai = improved_key_rate(r, ctx.source, ctx.f);
        row.rate_improved = detail::floor_rate(ai.rate);
        row.e_t = ai.e_t;
        row.correction = ai.correction;
      }
    }
    if (detail::selected(cfg, Method::InfiniteDecoy))
      row.rate_infinite = detail::floor_rate(key_rate_at(ctx, Method::InfiniteDecoy, l, N));
    rows.push_back(row);
  }
  return rows;
}

inline void write_scan_csv(std::ostream& out, const RunConfig& cfg,
                           const std::vector<ScanRow>& rows) {
  using detail::format_g;
  out << "distance_km";
  if (detail::selected(cfg, Method::OneDecoy)) out << ",rate_one_decoy";
  if (detail::selected(cfg, Method::VacuumWeak)) out << ",rate_vacuum_weak";
  if (detail::selected(cfg, Method::Improved)) out << ",rate_improved";
  if (detail::selected(cfg, Method::InfiniteDecoy)) out << ",rate_infinite_decoy";
  out << ",e_t,delta_n,delta_1,delta_2,correction_term\n";
  for (const ScanRow& r : rows) {
    out << format_g(r.distance_km);
    if (r.rate_one_decoy) out << "," << format_g(*r.rate_one_decoy);
    if (r.rate_vacuum_weak) out << "," << format_g(*r.rate_vacuum_weak);
    if (r.rate_improved) out << "," << format_g(*r.rate_improved);
    if (r.rate_infinite) out << "," << format_g(*r.rate_infinite);
    out << "," << format_g(r.e_t) << "," << format_g(r.delta_n) << "," << format_g(r.delta_1)
        << "," << format_g(r.delta_2) << "," << format_g(r.correction) << "\n";
  }
}

struct MaxDistanceRow {
  double N = 0.0;  // <= 0 marks the asymptotic limit
  Method method = Method::Improved;
  double distance_km = 0.0;
};

inline std::vector<MaxDistanceRow> run_max_distance(const RunConfig& cfg) {
  const RateContext ctx = cfg.context();
  std::vector<MaxDistanceRow> rows;
  std::vector<double> blocks = cfg.asymptotic ? std::vector<double>{0.0} : cfg.n_values;
  for (double n : blocks)
    for (Method m : cfg.methods)
      rows.push_back({n, m, max_distance(ctx, m, n)});
  return rows;
}

inline void write_max_distance_csv(std::ostream& out, const std::vector<MaxDistanceRow>& rows) {
  using detail::format_g;
  out << "N,method,max_distance_km\n";
  for (const MaxDistanceRow& r : rows) {
    out << (r.N > 0.0 ? format_g(r.N) : std::string("inf")) << "," << to_string(r.method) << ","
        << format_g(r.distance_km) << "\n";
  }
}

inline ValidationSummary run_validation(const RunConfig& cfg,
                                        std::vector<TrialOutcome>* capture = nullptr) {
  const double N = cfg.n_values.front();
  const PhotonChannelTruth truth =
      build_truth(cfg.source, cfg.channel, cfg.distance_km, N, cfg.seed);
  return estimate_failure_rate(truth, cfg.f, cfg.epsilon, cfg.trials, cfg.seed, cfg.options,
                               capture);
}

inline void write_validation_csv(std::ostream& out, const ValidationSummary& s) {
  using detail::format_g;
  out << "trials,violations_yield,violations_count,violations_any,fraction,"
         "wilson_low,wilson_high,epsilon,budget,realized_value,mean_rate\n";
  out << s.trials << "," << s.violations_yield << "," << s.violations_count << ","
      << s.violations_any << "," << format_g(s.fraction) << "," << format_g(s.wilson_low) << ","
      << format_g(s.wilson_high) << "," << format_g(s.epsilon) << "," << format_g(s.budget)
      << "," << format_g(s.realized_value) << "," << format_g(s.mean_rate) << "\n";
}

// Single-shot evaluation of every selected finite method on one counts
// record.
struct CountsEvaluation {
  Method method = Method::Improved;
  FiniteKeyResult result{};
};

inline std::vector<CountsEvaluation> evaluate_counts(const RunConfig& cfg,
                                                     const FiniteCounts& counts) {
  std::vector<CountsEvaluation> rows;
  for (Method m : cfg.methods) {
    CountsEvaluation ev;
    ev.method = m;
    switch (m) {
      case Method::OneDecoy:
        ev.result = finite_one_decoy_rate(counts, cfg.source, cfg.f, cfg.epsilon, cfg.options);
        break;
      case Method::Improved:
        ev.result = finite_improved_rate(counts, cfg.source, cfg.f, cfg.epsilon, cfg.options);
        break;
      case Method::VacuumWeak:
        if (!counts.has_vacuum)
          throw ConfigError("vacuum-weak selected but counts file has no vacuum columns");
        ev.result =
            finite_vacuum_weak_rate(counts, cfg.vw_source(), cfg.f, cfg.epsilon, cfg.options);
        break;
      case Method::InfiniteDecoy:
        continue;  // not defined for a single counts record
    }
    rows.push_back(ev);
  }
  return rows;
}

inline void write_counts_evaluation_csv(std::ostream& out,
                                        const std::vector<CountsEvaluation>& rows) {
  using detail::format_g;
  out << "method,rate,bound,n_mu1_lower,delta_n,delta_1,delta_2,e_t,epsilon_total,status,"
         "degenerate_vacuum\n";
  for (const CountsEvaluation& ev : rows) {
    const FiniteKeyResult& r = ev.result;
    out << to_string(ev.method) << "," << format_g(detail::floor_rate(r.rate)) << ","
        << format_g(r.bound) << "," << format_g(r.n_mu1_lower) << "," << format_g(r.delta_n)
        << "," << format_g(r.delta_1) << "," << format_g(r.delta_2) << ","
        << format_g(r.tangent.point) << "," << format_g(r.epsilon_total) << ","
        << to_string(r.status) << "," << (r.degenerate_vacuum ? "true" : "false") << "\n";
  }
}

}  // namespace decoyrate
