// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "greenran/beam_tracker.hpp"
#include "greenran/radio_env.hpp"
#include "oracles.hpp"

using namespace greenran;

namespace {

TrackerConfig small_config(int n_az, int n_el, int budget, int window = 4) {
  TrackerConfig c;
  c.grid = {n_az, n_el};
  c.budget_per_slot = budget;
  c.window_slots = window;
  return c;
}

ChannelScenario one_lobe(BeamGrid g, double noise = 0.0) {
  ChannelScenario s;
  s.grid = g;
  s.measurement_noise_db = noise;
  s.horizon_slots = 200;
  Lobe l;
  l.center_az0 = g.n_az / 2.0 - 0.3;
  l.center_el0 = g.n_el / 2.0 + 0.2;
  l.drift_az = 0.045;
  s.lobes = {l};
  return s;
}

} // namespace

TEST(InitDesign, ThreeByThreeCentreThenCorner) {
  const BeamGrid g{3, 3};
  EXPECT_EQ(init_design(g, 1), (std::vector<BeamIndex>{{1, 1}}));
  EXPECT_EQ(init_design(g, 2), (std::vector<BeamIndex>{{1, 1}, {0, 0}}));
}

TEST(InitDesign, MatchesExhaustiveMaxMinSearch) {
  for (auto [na, ne, count] : {std::tuple{8, 8, 6}, {8, 8, 24}, {5, 7, 12}, {4, 4, 16}}) {
    const auto got = init_design({na, ne}, count);
    const auto want = oracle::maxmin_design(na, ne, count);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].az, want[i].first) << i;
      EXPECT_EQ(got[i].el, want[i].second) << i;
    }
  }
}

TEST(InitDesign, CountBeyondGridRejected) {
  EXPECT_THROW(init_design({3, 3}, 10), CountExceedsGrid);
  EXPECT_TRUE(init_design({3, 3}, 0).empty());
}

TEST(ExpectedImprovement, ZeroVarianceBelowIncumbent) {
  EXPECT_EQ(expected_improvement(-81.0, 0.0, -80.0), 0.0);
  EXPECT_EQ(expected_improvement(-79.0, 0.0, -80.0), 1.0);
}

TEST(ExpectedImprovement, AtIncumbentUnitSigma) {
  EXPECT_NEAR(expected_improvement(-80.0, 1.0, -80.0), 0.3989422804014327, 1e-12);
  EXPECT_NEAR(oracle::ei_quadrature(-80.0, 1.0, -80.0), 0.3989422804014327, 1e-6);
}

TEST(ExpectedImprovement, MatchesQuadratureOnLattice) {
  for (double mu : {-3.0, -0.5, 0.0, 1.0, 4.0})
    for (double sigma : {0.0, 0.1, 1.0, 2.5, 5.0})
      EXPECT_NEAR(expected_improvement(mu, sigma * sigma, 0.0), oracle::ei_quadrature(mu, sigma, 0.0), 1e-6)
          << mu << " " << sigma;
}

TEST(ExpectedImprovement, NonDecreasingInVarianceAtEqualMean) {
  Rng rng(8);
  for (int i = 0; i < 2000; ++i) {
    const double mu = rng.uniform(-10, 10), f = rng.uniform(-10, 10);
    const double v1 = rng.uniform(0, 30), v2 = v1 + rng.uniform(0, 30);
    EXPECT_GE(expected_improvement(mu, v2, f), expected_improvement(mu, v1, f));
  }
}

TEST(Tracker, ConfigRejectsWindowBeyondCap) {
  auto c = small_config(8, 8, 64, 4);
  EXPECT_THROW(make_tracker(c), InvalidArgument);
  c.window_slots = 3;
  EXPECT_NO_THROW(make_tracker(c));
  c.budget_per_slot = 65;
  EXPECT_THROW(make_tracker(c), InvalidArgument);
}

TEST(SelectMeasurements, ColdStartTakesInitDesign) {
  const auto s = make_tracker(small_config(3, 3, 4));
  const auto picks = select_measurements(s, 0, [](const BeamPoint&) { return -90.0; });
  const auto design = init_design({3, 3}, 4);
  ASSERT_EQ(picks.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ((BeamIndex{picks[i].az, picks[i].el}), design[i]);
  EXPECT_THROW(select_measurements(s, 1, [](const BeamPoint&) { return 0.0; }), SlotMismatch);
}

TEST(SelectMeasurements, FullBudgetCoversEveryBeamOnce) {
  auto s = make_tracker(small_config(3, 3, 9));
  for (int slot = 0; slot < 3; ++slot) {
    const auto picks = select_measurements(s, slot, [](const BeamPoint& p) { return -80.0 - p.az - p.el; });
    std::set<int> seen;
    for (const auto& p : picks) seen.insert(p.az * 3 + p.el);
    EXPECT_EQ(seen.size(), 9u);
    s = advance_slot(run_slot(s, [](const BeamPoint& p) { return -80.0 - p.az - p.el; }).first);
  }
}

TEST(SelectMeasurements, TwoBeamHandComputedEi) {
  auto s = make_tracker(small_config(2, 1, 1));
  s = ingest_measurement(s, {0, 0, 0}, -80.0);
  s = advance_slot(s);
  // One-observation GP at slot 1: k_i = 25 e^{-1/8} e^{-d_i^2 / 4.5}, K + noise = 26.
  const double kt = 25.0 * std::exp(-1.0 / 8.0);
  const double k0 = kt, k1 = kt * std::exp(-1.0 / 4.5);
  const double m0 = -100.0 + k0 * 20.0 / 26.0, m1 = -100.0 + k1 * 20.0 / 26.0;
  const double v0 = 25.0 - k0 * k0 / 26.0, v1 = 25.0 - k1 * k1 / 26.0;
  const double inc = std::max(m0, m1);
  auto ei = [&](double m, double v) {
    const double sd = std::sqrt(v), z = (m - inc) / sd;
    return (m - inc) * 0.5 * std::erfc(-z / std::sqrt(2.0)) + sd * std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
  };
  const int want = ei(m0, v0) >= ei(m1, v1) ? 0 : 1;
  const auto picks = select_measurements(s, 1, [](const BeamPoint&) { return -85.0; });
  ASSERT_EQ(picks.size(), 1u);
  EXPECT_EQ(picks[0].az, want);
}

TEST(Ingest, GrowsHistoryAndTracksIncumbent) {
  auto s = make_tracker(small_config(4, 4, 4));
  s = ingest_measurement(s, {1, 1, 0}, -75.0);
  EXPECT_EQ(s.history.size(), 1u);
  s = ingest_measurement(s, {2, 1, 0}, -90.0);
  EXPECT_EQ(s.history.size(), 2u);
  EXPECT_EQ(*s.incumbent, -75.0);
  EXPECT_THROW(ingest_measurement(s, {1, 1, 0}, -70.0), DuplicateMeasurement);
  EXPECT_THROW(ingest_measurement(s, {0, 0, 1}, -70.0), SlotMismatch);
  EXPECT_THROW(ingest_measurement(s, {9, 0, 0}, -70.0), InvalidArgument);
}

TEST(AdvanceSlot, DropsSamplesOutsideWindow) {
  auto s = make_tracker(small_config(4, 4, 2, 3));
  for (int slot = 0; slot < 4; ++slot) {
    s = ingest_measurement(s, {slot, 0, slot}, -80.0);
    if (slot < 3) s = advance_slot(s);
  }
  EXPECT_EQ(s.current_slot, 3);
  s = advance_slot(s);
  EXPECT_EQ(s.current_slot, 4);
  for (const auto& h : s.history) EXPECT_GE(h.point.slot, 1);
  EXPECT_EQ(s.history.size(), 3u);
}

TEST(AdvanceSlot, RandomRunMatchesReplayWindow) {
  const BeamGrid g{4, 4};
  const auto cfg = small_config(4, 4, 3, 3);
  auto s = make_tracker(cfg);
  auto scenario = one_lobe(g, 0.5);
  Rng rng(99);
  std::vector<RsrpSample> log;
  for (int slot = 0; slot < 50; ++slot) {
    auto [next, d] = run_slot(s, [&](const BeamPoint& p) { return measure(scenario, {p.az, p.el}, p.slot, rng); });
    log.insert(log.end(), d.measured.begin(), d.measured.end());
    EXPECT_LE(static_cast<int>(next.history.size()), cfg.max_history());
    s = advance_slot(next);
    std::vector<RsrpSample> want;
    for (const auto& x : log)
      if (x.point.slot >= s.current_slot - cfg.window_slots) want.push_back(x);
    ASSERT_EQ(s.history.size(), want.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
      EXPECT_EQ(s.history[i].point, want[i].point);
      EXPECT_EQ(s.history[i].rsrp, want[i].rsrp);
    }
    EXPECT_LE(static_cast<int>(s.history.size()), cfg.window_slots * cfg.budget_per_slot);
  }
}

TEST(PredictBest, EmptyHistoryRejected) {
  EXPECT_THROW(predict_best(make_tracker(small_config(3, 3, 2)), 0), EmptyHistory);
}

TEST(PredictBest, SingleStrongObservationWins) {
  auto s = make_tracker(small_config(5, 5, 3));
  s = ingest_measurement(s, {3, 1, 0}, -60.0);
  EXPECT_EQ(predict_best(s, 0).first, (BeamIndex{3, 1}));
}

TEST(PredictBest, FourByOneMatchesOracleArgmax) {
  auto s = make_tracker(small_config(4, 1, 3));
  s = ingest_measurement(s, {0, 0, 0}, -80.0);
  s = ingest_measurement(s, {1, 0, 0}, -75.0);
  s = ingest_measurement(s, {3, 0, 0}, -90.0);
  std::vector<oracle::Obs> obs{{{0, 0, 0}, -80.0}, {{1, 0, 0}, -75.0}, {{3, 0, 0}, -90.0}};
  const oracle::Hyper h{1.5, 1.5, 8.0, 25.0, 1.0};
  int best = 0;
  double best_m = -1e300;
  for (int az = 0; az < 4; ++az) {
    const double m = oracle::gp_posterior(h, -100.0, obs, {az, 0, 0}).first;
    if (m > best_m) best_m = m, best = az;
  }
  const auto [beam, rsrp] = predict_best(s, 0);
  EXPECT_EQ(beam.az, best);
  EXPECT_NEAR(rsrp, best_m, 1e-8);
}

TEST(RunSlot, BudgetExactAndDistinct) {
  const BeamGrid g{6, 5};
  for (int budget : {1, 5, 12, 30}) {
    auto s = make_tracker(small_config(6, 5, budget, 2));
    const auto scenario = one_lobe(g, 0.5);
    Rng rng(budget);
    for (int slot = 0; slot < 8; ++slot) {
      auto [next, d] = run_slot(s, [&](const BeamPoint& p) { return measure(scenario, {p.az, p.el}, p.slot, rng); });
      std::set<int> seen;
      for (const auto& m : d.measured) seen.insert(g.linear(m.point.az, m.point.el));
      EXPECT_EQ(static_cast<int>(d.measured.size()), budget);
      EXPECT_EQ(static_cast<int>(seen.size()), budget);
      s = advance_slot(next);
    }
  }
}

TEST(RunSlot, ExhaustiveNoiselessFindsTrueArgmax) {
  const BeamGrid g{4, 4};
  auto cfg = small_config(4, 4, 16, 2);
  cfg.kernel.noise_variance = 1e-6;
  auto s = make_tracker(cfg);
  const auto scenario = one_lobe(g, 0.0);
  Rng rng(1);
  for (int slot = 0; slot < 30; ++slot) {
    auto [next, d] = run_slot(s, [&](const BeamPoint& p) { return measure(scenario, {p.az, p.el}, p.slot, rng); });
    EXPECT_EQ(d.predicted_beam, best_beam_oracle(scenario, slot).beam) << slot;
    s = advance_slot(next);
  }
}

TEST(RunSlot, Deterministic) {
  const BeamGrid g{5, 5};
  auto run = [&] {
    auto s = make_tracker(small_config(5, 5, 6, 3));
    const auto scenario = one_lobe(g, 0.5);
    Rng rng(42);
    std::vector<BeamPoint> trace;
    for (int slot = 0; slot < 12; ++slot) {
      auto [next, d] = run_slot(s, [&](const BeamPoint& p) { return measure(scenario, {p.az, p.el}, p.slot, rng); });
      for (const auto& m : d.measured) trace.push_back(m.point);
      trace.push_back({d.predicted_beam.az, d.predicted_beam.el, -1});
      s = advance_slot(next);
    }
    return trace;
  };
  EXPECT_EQ(run(), run());
}
