#include "decoyrate/asymptotic.hpp"

#include <cmath>

#include <gtest/gtest.h>

namespace {

using namespace decoyrate;

ObservedRates rates_at(double km) {
  return simulate_rates(SourceParams{}, ChannelParams{}, km);
}

TEST(OneDecoyYield, MatchesDirectFormulaAndClamps) {
  const SourceParams s;
  const ObservedRates r = rates_at(100.0);
  const double y0 = 3e-8;
  const YieldBound b = one_decoy_y1_lower(r, s, y0);
  const double direct = (s.mu * s.mu * r.q_nu * std::exp(s.nu) -
                         s.nu * s.nu * r.q_mu * std::exp(s.mu) -
                         (s.mu * s.mu - s.nu * s.nu) * y0) /
                        (s.mu * s.nu * (s.mu - s.nu));
  EXPECT_DOUBLE_EQ(b.value, direct);
  EXPECT_FALSE(b.clamped);

  // A huge assumed background drives the raw bound negative.
  const YieldBound low = one_decoy_y1_lower(r, s, 1.0);
  EXPECT_EQ(low.value, 0.0);
  EXPECT_TRUE(low.clamped);

  // Inflated decoy gain pushes the raw bound past 1.
  ObservedRates hot = r;
  hot.q_nu = 0.9;
  const YieldBound high = one_decoy_y1_lower(hot, s, 0.0);
  EXPECT_EQ(high.value, 1.0);
  EXPECT_TRUE(high.clamped);
}

TEST(OneDecoyError, TakesTheTighterIntensityAndHandlesNoSignal) {
  const SourceParams s;
  const ObservedRates r = rates_at(100.0);
  const double y0 = 3e-8;
  const double y1 = one_decoy_y1_lower(r, s, y0).value;
  const double e1 = one_decoy_e1_upper(r, s, y0, y1);
  const double lim_mu = (r.eq_mu * std::exp(s.mu) - 0.5 * y0) / (s.mu * y1);
  const double lim_nu = (r.eq_nu * std::exp(s.nu) - 0.5 * y0) / (s.nu * y1);
  EXPECT_DOUBLE_EQ(e1, std::min(lim_mu, lim_nu));
  EXPECT_LT(e1, 0.5);
  // The decoy intensity gives the tighter cap here.
  EXPECT_LT(lim_nu, lim_mu);
  EXPECT_EQ(one_decoy_e1_upper(r, s, y0, 0.0), 0.5);
}

TEST(OneDecoyBounds, GridWorstCaseSitsAtTheIntervalEnds) {
  const SourceParams s;
  const ObservedRates r = rates_at(100.0);
  const OneDecoyBounds b = one_decoy_bounds(r, s);
  const double cap = one_decoy_y0_cap(r, s);
  EXPECT_DOUBLE_EQ(b.y0_low, 0.0);
  EXPECT_DOUBLE_EQ(b.y0_high, cap);
  // The yield bound decreases in y0, so its worst case is the top end; the
  // error bound (at that worst yield) is largest at the bottom end.
  EXPECT_DOUBLE_EQ(b.y1, one_decoy_y1_lower(r, s, cap).value);
  EXPECT_DOUBLE_EQ(b.e1, one_decoy_e1_upper(r, s, 0.0, b.y1));
}

TEST(OneDecoyBounds, AreConservativeForEveryAdmissibleBackground) {
  const SourceParams s;
  const ObservedRates r = rates_at(120.0);
  const OneDecoyBounds b = one_decoy_bounds(r, s);
  for (int i = 0; i <= 20; ++i) {
    const double y0 = b.y0_low + (b.y0_high - b.y0_low) * i / 20.0;
    const double y1 = one_decoy_y1_lower(r, s, y0).value;
    EXPECT_LE(b.y1, y1 + 1e-15);
    EXPECT_GE(b.e1, one_decoy_e1_upper(r, s, y0, y1) - 1e-15);
  }
}

TEST(KeyRates, MatchFrozenReferencesAt100km) {
  const SourceParams s;
  const ChannelParams c;
  const ObservedRates r = rates_at(100.0);
  const double f = 1.06;
  EXPECT_NEAR(one_decoy_key_rate(r, s, f), 8.518612e-4, 1e-9);
  EXPECT_NEAR(vacuum_weak_key_rate(r, s, c.y0, f), 9.284638e-4, 1e-9);
  EXPECT_NEAR(infinite_decoy_key_rate(r, s, c, 100.0, f), 1.083023e-3, 1e-9);
  const AsymptoticImproved imp = improved_key_rate(r, s, f);
  EXPECT_NEAR(imp.rate, 9.339196e-4, 1e-9);
  EXPECT_NEAR(imp.bound, 4.548217e-3, 1e-9);
  EXPECT_NEAR(imp.e_t, 1.502110e-2, 1e-7);
  EXPECT_NEAR(imp.correction, -1.296577e-4, 1e-9);
  EXPECT_FALSE(imp.shrunk);
  EXPECT_FALSE(imp.floored);
}

TEST(KeyRates, RespectTheMethodOrdering) {
  const SourceParams s;
  const ChannelParams c;
  for (double km : {10.0, 60.0, 100.0, 150.0, 200.0}) {
    const ObservedRates r = rates_at(km);
    const double od = one_decoy_key_rate(r, s, 1.06);
    const double vw = vacuum_weak_key_rate(r, s, c.y0, 1.06);
    const double imp = improved_key_rate(r, s, 1.06).rate;
    const double inf = infinite_decoy_key_rate(r, s, c, km, 1.06);
    EXPECT_LE(od, vw * (1.0 + 1e-12)) << km;
    EXPECT_LE(od, imp * (1.0 + 1e-12)) << km;
    EXPECT_LE(imp, inf * (1.0 + 1e-12)) << km;
    // No claim relating vacuum+weak to the improved two-intensity method:
    // the vacuum decoy adds information the latter does not use, and it wins
    // at long distance (e.g. 200 km) while losing at short.
  }
}

TEST(KeyRates, FloorAtZeroPastTheReach) {
  const SourceParams s;
  const ChannelParams c;
  const ObservedRates r = rates_at(320.0);
  EXPECT_EQ(one_decoy_key_rate(r, s, 1.06), 0.0);
  EXPECT_EQ(improved_key_rate(r, s, 1.06).rate, 0.0);
  EXPECT_EQ(infinite_decoy_key_rate(r, s, c, 320.0, 1.06), 0.0);
}

TEST(TwoPhotonSolution, SolvesBothGainSystemsExactly) {
  const SourceParams s;
  for (double km : {30.0, 100.0, 180.0}) {
    const ObservedRates r = rates_at(km);
    const TwoPhotonSolution sol = two_photon_solution(r, s);
    ASSERT_TRUE(sol.ok);
    for (double x : {s.mu, s.nu}) {
      const double q = x == s.mu ? r.q_mu : r.q_nu;
      const double eq = x == s.mu ? r.eq_mu : r.eq_nu;
      EXPECT_NEAR(x * sol.y1 + 0.5 * x * x * sol.y2, q * std::exp(x),
                  1e-12 * q * std::exp(x));
      EXPECT_NEAR(x * sol.e1y1 + 0.5 * x * x * sol.e2y2, eq * std::exp(x),
                  1e-11 * eq * std::exp(x));
    }
    EXPECT_GT(sol.e1, 0.0);
    EXPECT_LT(sol.e1, 0.5);
  }
}

TEST(ImprovedBound, EqualsTwoPhotonDecompositionAtTheTangencyPoint) {
  const SourceParams s;
  for (double km : {20.0, 100.0, 170.0}) {
    const ObservedRates r = rates_at(km);
    const TwoPhotonSolution sol = two_photon_solution(r, s);
    ASSERT_TRUE(sol.ok);
    const double lhs = improved_bound(r, s, tangent_at(sol.e1));
    const double rhs = two_photon_corrected_value(r, s);
    EXPECT_NEAR(lhs, rhs, 1e-13 * std::fabs(rhs));
  }
}

TEST(ImprovedBound, EveryFeasibleLineCertifiesAndTheChosenOneIsNearBest) {
  const SourceParams s;
  const ObservedRates r = rates_at(100.0);
  const AsymptoticImproved imp = improved_key_rate(r, s, 1.06);
  const double at_choice = improved_bound(r, s, tangent_at(imp.e_t));
  const double eve = eve_optimal_value(eve_optimal_config(r, s, ChannelParams{}.y0));
  // Every feasible tangency point yields a valid lower bound on the
  // adversarial value; the chosen point sits within a fraction of a percent
  // of the best one on a fine grid.
  double grid_best = 0.0;
  for (int i = 1; i <= 358; ++i) {
    const double v = improved_bound(r, s, tangent_at(i * 1e-3));
    EXPECT_LE(v, eve + 1e-12);
    grid_best = std::max(grid_best, v);
  }
  EXPECT_GE(at_choice, 0.995 * grid_best);
  EXPECT_LE(at_choice, grid_best);
}

TEST(ImprovedRate, SaturatedSinglePhotonErrorsGiveZero) {
  const SourceParams s;
  ObservedRates r = rates_at(100.0);
  r.eq_mu = 0.5 * r.q_mu;
  r.eq_nu = 0.5 * r.q_nu;
  const AsymptoticImproved imp = improved_key_rate(r, s, 1.06);
  EXPECT_EQ(imp.rate, 0.0);
  EXPECT_EQ(imp.bound, 0.0);
}

TEST(ImprovedRate, ZeroErrorChannelTakesTheFlooredTangency) {
  const SourceParams s;
  ChannelParams c;
  c.e_d = 0.0;
  c.y0 = 0.0;
  const ObservedRates r = simulate_rates(s, c, 50.0);
  const AsymptoticImproved imp = improved_key_rate(r, s, 1.06);
  EXPECT_TRUE(imp.floored);
  EXPECT_DOUBLE_EQ(imp.e_t, 1e-6);
  EXPECT_GT(imp.rate, 0.0);
}

TEST(ImprovedRate, TangencyPastTheFeasibilityCapIsShrunk) {
  const SourceParams s;
  // Craft observations whose two-photon error solution lies above the cap
  // but below 1/2: scale the error gains of a real channel point.
  ObservedRates r = rates_at(100.0);
  const TwoPhotonSolution base = two_photon_solution(r, s);
  const double target = 0.45;
  const double scale = target / base.e1;
  r.eq_mu *= scale;
  r.eq_nu *= scale;
  const TwoPhotonSolution sol = two_photon_solution(r, s);
  ASSERT_GT(sol.e1, max_feasible_et(s.mu, s.nu));
  ASSERT_LT(sol.e1, 0.5);
  const AsymptoticImproved imp = improved_key_rate(r, s, 1.06);
  EXPECT_TRUE(imp.shrunk);
  EXPECT_NEAR(imp.e_t, max_feasible_et(s.mu, s.nu) - 1e-6, 1e-12);
}

TEST(EveOptimum, ReproducesTheObservedRatesExactly) {
  const SourceParams s;
  const ChannelParams c;
  for (double km : {50.0, 100.0, 160.0}) {
    const ObservedRates r = rates_at(km);
    const EveConfig cfg = eve_optimal_config(r, s, c.y0);
    ASSERT_TRUE(cfg.feasible) << km;
    for (double x : {s.mu, s.nu}) {
      const double q_target = (x == s.mu ? r.q_mu : r.q_nu) * std::exp(x);
      const double eq_target = (x == s.mu ? r.eq_mu : r.eq_nu) * std::exp(x);
      double q = 0.0, eq = 0.0, mass = 0.0;
      for (int k = 0; k < static_cast<int>(cfg.yields.size()); ++k) {
        const double pk = poisson_pmf(x, k) * std::exp(x);  // x^k / k!
        q += pk * cfg.yields[k];
        eq += pk * cfg.yields[k] * cfg.errors[k];
        mass += pk;
      }
      // Classes above k0 click always and err always.
      const double tail = std::exp(x) - mass;
      q += tail;
      eq += tail;
      EXPECT_NEAR(q, q_target, 1e-11 * q_target) << km << " " << x;
      EXPECT_NEAR(eq, eq_target, 1e-9 * eq_target) << km << " " << x;
    }
  }
}

TEST(EveOptimum, MatchesFrozenStructureAt100km) {
  const SourceParams s;
  const ObservedRates r = rates_at(100.0);
  const EveConfig cfg = eve_optimal_config(r, s, 3e-8);
  ASSERT_TRUE(cfg.feasible);
  EXPECT_EQ(cfg.k0, 7);
  EXPECT_NEAR(cfg.yields[6], 0.3844, 5e-4);
  EXPECT_NEAR(cfg.e2, 0.0, 1e-9);
  EXPECT_NEAR(eve_optimal_value(cfg), 4.554668e-3, 1e-9);
  // The adversarial value upper-bounds what any certified bound may claim.
  EXPECT_GE(eve_optimal_value(cfg),
            improved_key_rate(r, s, 1.06).bound - 1e-12);
}

TEST(EveOptimum, InfeasibleWhenErrorBudgetIsNegative) {
  const SourceParams s;
  ObservedRates r = rates_at(100.0);
  r.eq_nu = 0.4 * r.q_nu;  // decoy errors no channel of this form explains
  const EveConfig cfg = eve_optimal_config(r, s, 3e-8);
  EXPECT_FALSE(cfg.feasible);
  EXPECT_EQ(eve_optimal_value(cfg), 0.0);
}

TEST(EveOptimum, PureSinglePhotonChannelHitsTheTruncationLimit) {
  // Observations generated by exactly Y1 = 0.1, e1 = 0.03 and nothing else.
  // The construction saturates errors above two photons, but these
  // observations leave a zero error budget there, so no finite truncation
  // reproduces them exactly: the search must signal that instead of
  // returning garbage. (If rounding collapses the saturated tail to zero
  // mass first, the recovered channel is the true one; both outcomes are
  // sound, silent nonsense is not.)
  const SourceParams s;
  const double y1 = 0.1, e1 = 0.03;
  ObservedRates r;
  r.q_mu = s.mu * y1 * std::exp(-s.mu);
  r.q_nu = s.nu * y1 * std::exp(-s.nu);
  r.eq_mu = e1 * r.q_mu;
  r.eq_nu = e1 * r.q_nu;
  const EveConfig cfg = eve_optimal_config(r, s, 0.0);
  if (cfg.feasible) {
    EXPECT_NEAR(cfg.y1, y1, 1e-6);
    EXPECT_NEAR(eve_optimal_value(cfg), y1 * (1.0 - binary_entropy(e1)), 1e-6);
  } else {
    EXPECT_EQ(eve_optimal_value(cfg), 0.0);
  }
  EXPECT_TRUE(std::isfinite(eve_optimal_value(cfg)));
}

}  // namespace
