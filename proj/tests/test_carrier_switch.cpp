// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "greenran/carrier_switch.hpp"
#include "greenran/network_env.hpp"
#include "greenran/rng.hpp"
#include "oracles.hpp"

using namespace greenran;

namespace {

ThresholdBelief grid_belief(std::vector<double> locs, std::vector<double> scales) {
  ThresholdBelief b;
  b.loc_grid = std::move(locs);
  b.scale_grid = std::move(scales);
  const double n = static_cast<double>(b.loc_grid.size() * b.scale_grid.size());
  b.density.assign(b.loc_grid.size() * b.scale_grid.size(), 1.0 / n);
  return b;
}

ThresholdBelief point_mass(ThresholdBelief b, std::size_t i, std::size_t j) {
  std::fill(b.density.begin(), b.density.end(), 0.0);
  b.at(i, j) = 1.0;
  return b;
}

double loc_variance(const ThresholdBelief& b) {
  double m = 0, m2 = 0;
  for (std::size_t i = 0; i < b.n_loc(); ++i)
    for (std::size_t j = 0; j < b.n_scale(); ++j) {
      m += b.at(i, j) * static_cast<double>(i);
      m2 += b.at(i, j) * static_cast<double>(i * i);
    }
  return m2 - m * m;
}

} // namespace

TEST(Hysteresis, DeadbandHolds) {
  const auto s = make_switch_state(default_carriers(), 0.3, 0.45);
  EXPECT_EQ(hysteresis_step(s, 0.4), s);
  EXPECT_EQ(hysteresis_step(s, 0.3), s);
  EXPECT_EQ(hysteresis_step(s, 0.45), s);
}

TEST(Hysteresis, ZeroLowerThresholdNeverSwitchesOff) {
  auto s = make_switch_state(default_carriers(), 0.0, 0.15);
  for (int i = 0; i <= 100; ++i) EXPECT_EQ(hysteresis_step(s, i / 100.0).active_count(), 4u);
}

TEST(Hysteresis, HighestOrderGoesFirstAndComesBackLast) {
  auto s = make_switch_state(default_carriers(), 0.3, 0.45);
  s = hysteresis_step(s, 0.1);
  EXPECT_FALSE(s.carriers[3].active);
  EXPECT_TRUE(s.carriers[2].active);
  s = hysteresis_step(s, 0.1);
  EXPECT_FALSE(s.carriers[2].active);
  EXPECT_EQ(hysteresis_step(s, 0.1), s); // only locked carriers left
  s = hysteresis_step(s, 0.9);
  EXPECT_TRUE(s.carriers[2].active);
  EXPECT_FALSE(s.carriers[3].active);
}

TEST(Hysteresis, ExhaustiveStateLoadProperties) {
  const auto cfgs = default_carriers();
  for (double rho_min : {0.0, 0.2, 0.5}) {
    const double rho_max = rho_min + 0.15;
    for (int mask = 0; mask < 16; ++mask) {
      auto s = make_switch_state(cfgs, rho_min, rho_max);
      bool valid = true;
      for (int i = 0; i < 4; ++i) {
        s.carriers[i].active = (mask >> i) & 1;
        valid &= !(cfgs[i].coverage_locked && !s.carriers[i].active);
      }
      if (!valid) continue;
      for (int k = 0; k <= 100; ++k) {
        const double load = k / 100.0;
        const auto next = hysteresis_step(s, load);
        int changed = 0;
        for (int i = 0; i < 4; ++i) changed += next.carriers[i].active != s.carriers[i].active;
        EXPECT_LE(changed, 1);
        if (load > rho_min && load < rho_max) {
          EXPECT_EQ(next, s);
        }
        auto cur = s;
        int steps = 0;
        while (steps <= 4) {
          auto n2 = hysteresis_step(cur, load);
          for (const auto& c : n2.carriers) {
            if (c.config.coverage_locked) {
              EXPECT_TRUE(c.active);
            }
          }
          if (n2 == cur) break;
          cur = n2;
          ++steps;
        }
        EXPECT_LE(steps, 4);
      }
    }
  }
}

TEST(DeriveUpper, ArithmeticAndOverflow) {
  EXPECT_DOUBLE_EQ(derive_upper(0.3, 0.2), 0.5);
  EXPECT_THROW(derive_upper(0.95, 0.2), GapOverflow);
  EXPECT_THROW(derive_upper(0.3, 0.0), InvalidArgument);
  EXPECT_THROW(make_switch_state(default_carriers(), 0.3, 0.3), InvalidArgument);
}

TEST(QosProbability, SymmetryLimitAndValue) {
  EXPECT_DOUBLE_EQ(qos_probability(0.4, 0.07, 0.4), 0.5);
  EXPECT_NEAR(qos_probability(0.5, 1e-6, 0.3), 1.0, 1e-15);
  EXPECT_NEAR(qos_probability(0.5, 0.1, 0.6), 1.0 / (1.0 + std::exp(1.0)), 1e-15);
  EXPECT_NEAR(qos_probability(0.5, 0.1, 0.6), 0.2689414213699951, 1e-12);
  EXPECT_NEAR(qos_probability(0.5, 0.1, 0.6) + qos_failure_probability(0.5, 0.1, 0.6), 1.0, 1e-15);
  EXPECT_GT(qos_failure_probability(0.9, 0.01, 0.02), 0.0); // no cancellation to 0
}

TEST(BeliefUpdate, FlatLikelihoodLeavesBeliefUnchanged) {
  // Every cell sits at loc = rho, so the likelihood is 0.5 everywhere.
  auto c = grid_belief({0.4, 0.6}, {0.05, 0.1});
  c.loc_grid = {0.4, 0.4};
  const auto d = belief_update(c, {0.4, false});
  for (std::size_t k = 0; k < c.density.size(); ++k) EXPECT_NEAR(d.density[k], c.density[k], 1e-15);
}

TEST(BeliefUpdate, TwoCellHandBayes) {
  // Likelihoods 0.4 and 0.8 at rho = 0.5, scale 0.1.
  const double lo = 0.5 - 0.1 * std::log(1.5), hi = 0.5 - 0.1 * std::log(0.25);
  auto b = grid_belief({lo, hi}, {0.1});
  EXPECT_NEAR(qos_probability(lo, 0.1, 0.5), 0.4, 1e-12);
  EXPECT_NEAR(qos_probability(hi, 0.1, 0.5), 0.8, 1e-12);
  b = belief_update(b, {0.5, true});
  EXPECT_NEAR(b.density[0], 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(b.density[1], 2.0 / 3.0, 1e-12);
}

TEST(BeliefUpdate, CoarseGridWarmStartFrozen) {
  auto b = uniform_belief({0.2, 0.8, 3, 0.1, 0.1, 1});
  b = belief_update(b, {0.3, true});
  EXPECT_NEAR(b.density[0], 0.12549496, 1e-8);
  EXPECT_NEAR(b.density[1], 0.41100248, 1e-8);
  EXPECT_NEAR(b.density[2], 0.46350256, 1e-8);
}

TEST(BeliefUpdate, ObservationOrderCommutes) {
  const auto b = uniform_belief(BeliefGridSpec{});
  const auto x = belief_update(belief_update(b, {0.35, true}), {0.35, false});
  const auto y = belief_update(belief_update(b, {0.35, false}), {0.35, true});
  for (std::size_t k = 0; k < x.density.size(); ++k) EXPECT_NEAR(x.density[k], y.density[k], 1e-15);
}

TEST(BeliefUpdate, DegenerateLikelihoodThrows) {
  auto b = point_mass(grid_belief({0.1, 0.9}, {1e-4}), 0, 0);
  EXPECT_THROW(belief_update(b, {0.99, true}), DegenerateLikelihood);
}

TEST(BeliefTransition, ZeroSigmaIsIdentity) {
  auto b = belief_update(uniform_belief(BeliefGridSpec{}), {0.3, false});
  const auto c = belief_transition(b, 0.0, 0.0);
  EXPECT_EQ(b.density, c.density);
}

TEST(BeliefTransition, InteriorDeltaMatchesDirectConvolution) {
  const auto b = point_mass(uniform_belief({0.1, 0.5, 9, 0.02, 0.2, 7}), 4, 3);
  for (auto [sl, ss] : {std::pair{0.5, 0.25}, {1.0, 0.0}, {1.7, 0.9}}) {
    const auto got = belief_transition(b, sl, ss);
    const auto want = oracle::blur(b.density, 9, 7, sl, ss);
    for (std::size_t k = 0; k < want.size(); ++k) EXPECT_NEAR(got.density[k], want[k], 1e-14);
    // Symmetric about the source cell along loc.
    for (std::size_t d = 1; d <= 4; ++d) EXPECT_NEAR(got.at(4 - d, 3), got.at(4 + d, 3), 1e-15);
  }
}

TEST(BeliefTransition, EdgeMassReflects) {
  const auto b = point_mass(uniform_belief({0.1, 0.5, 6, 0.02, 0.2, 3}), 0, 0);
  const auto got = belief_transition(b, 1.3, 0.8);
  const auto want = oracle::blur(b.density, 6, 3, 1.3, 0.8);
  for (std::size_t k = 0; k < want.size(); ++k) EXPECT_NEAR(got.density[k], want[k], 1e-14);
}

TEST(BeliefTransition, EntropyAndLocSpreadNonDecreasing) {
  auto b = point_mass(uniform_belief(BeliefGridSpec{}), 30, 7);
  double h = b.entropy(), v = loc_variance(b);
  for (int step = 0; step < 40; ++step) {
    b = belief_transition(b, 0.5, 0.25);
    EXPECT_GE(b.entropy(), h - 1e-12);
    EXPECT_GE(loc_variance(b), v - 1e-12);
    h = b.entropy();
    v = loc_variance(b);
  }
}

TEST(PredictedSatisfaction, DegenerateAndSaturated) {
  const auto b = point_mass(uniform_belief(BeliefGridSpec{}), 20, 4);
  EXPECT_NEAR(predicted_satisfaction(b, 0.33), qos_probability(b.loc_grid[20], b.scale_grid[4], 0.33), 1e-15);
  auto far = grid_belief({0.7, 0.8}, {0.01, 0.02});
  far.loc_grid = {0.7, 0.8};
  EXPECT_NEAR(predicted_satisfaction(far, 0.02), 1.0, 1e-12);
}

TEST(PredictedSatisfaction, TwoLocAverage) {
  const auto b = grid_belief({0.3, 0.6}, {0.1});
  const double want = 0.5 * (1.0 / (1.0 + std::exp(1.0)) + 1.0 / (1.0 + std::exp(-2.0)));
  EXPECT_NEAR(predicted_satisfaction(b, 0.4), want, 1e-12);
  EXPECT_NEAR(predicted_satisfaction(b, 0.45), 0.5, 1e-12);
}

TEST(SelectThreshold, UpperEdgeWhenEverywhereSafe) {
  const auto b = point_mass(uniform_belief(BeliefGridSpec{}), 60, 0);
  EXPECT_EQ(select_threshold(b, 0.95, 0.02, 0.5), 0.5);
}

TEST(SelectThreshold, NoSafeThreshold) {
  const auto b = point_mass(uniform_belief(BeliefGridSpec{}), 0, 0);
  EXPECT_FALSE(select_threshold(b, 0.95).has_value());
  ThresholdPolicy p = make_policy(BeliefGridSpec{});
  p.belief = b;
  EXPECT_EQ(p.rho_min(), b.r_lo());
}

TEST(SelectThreshold, DeltaBeliefRoot) {
  auto b = grid_belief({0.02, 0.5, 0.8}, {0.1});
  b = point_mass(b, 1, 0);
  const auto rho = select_threshold(b, 0.95);
  ASSERT_TRUE(rho.has_value());
  EXPECT_NEAR(*rho, 0.20555610208335584, kThresholdTolerance);
  EXPECT_NEAR(*rho, 0.5 + 0.1 * std::log(0.05 / 0.95), kThresholdTolerance);
  EXPECT_THROW(select_threshold(b, 1.0), InvalidArgument);
}

TEST(BeliefProperties, RandomSequences) {
  Rng rng(2718);
  const BeliefGridSpec spec{0.02, 0.8, 21, 0.01, 0.3, 6};
  for (int trial = 0; trial < 200; ++trial) {
    auto b = uniform_belief(spec);
    for (int step = 0; step < 20; ++step) {
      const double rho = rng.uniform(0.02, 0.8);
      try {
        b = belief_update(b, {rho, rng.uniform() < 0.5});
      } catch (const DegenerateLikelihood&) {
        b = uniform_belief(spec);
      }
      EXPECT_NEAR(b.mass(), 1.0, 1e-9);
      b = belief_transition(b, rng.uniform(0, 1.5), rng.uniform(0, 1.0));
      EXPECT_NEAR(b.mass(), 1.0, 1e-9);
    }
    const auto r1 = select_threshold(b, 0.99).value_or(b.r_lo());
    const auto r2 = select_threshold(b, 0.9).value_or(b.r_lo());
    const auto r3 = select_threshold(b, 0.5).value_or(b.r_lo());
    EXPECT_LE(r1, r2 + kThresholdTolerance);
    EXPECT_LE(r2, r3 + kThresholdTolerance);
  }
}

TEST(Policy, SatisfiedHighObservationsRaiseThreshold) {
  auto p = make_policy(BeliefGridSpec{});
  const double start = p.rho_min();
  for (int i = 0; i < 30; ++i) p.observe({0.6, true});
  EXPECT_GT(p.rho_min(), start);
  const double high = p.rho_min();
  for (int i = 0; i < 30; ++i) p.observe({0.3, false});
  EXPECT_LT(p.rho_min(), high);
  EXPECT_LE(p.rho_max(), 1.0);
}

TEST(Policy, PinnedThresholdIgnoresObservations) {
  auto p = make_policy(BeliefGridSpec{});
  p.pinned_rho_min = 0.0;
  const auto before = p.belief.density;
  p.observe({0.5, false});
  EXPECT_EQ(p.belief.density, before);
  EXPECT_EQ(p.rho_min(), 0.0);
  EXPECT_DOUBLE_EQ(p.rho_max(), 0.15);
}
