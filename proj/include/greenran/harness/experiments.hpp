// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <future>
#include <string>
#include <vector>

#include <json.hpp>

#include "greenran/beam_tracker.hpp"
#include "greenran/carrier_switch.hpp"
#include "greenran/harness/config.hpp"
#include "greenran/harness/io.hpp"
#include "greenran/network_env.hpp"
#include "greenran/radio_env.hpp"
#include "greenran/rng.hpp"

namespace greenran::harness {

namespace fs = std::filesystem;

/// Runs `fn(seed)` for every seed, up to `jobs` at a time; results keep seed order.
template <typename Fn>
auto map_seeds(const std::vector<std::uint64_t>& seeds, int jobs, Fn fn) {
  using R = decltype(fn(seeds.front()));
  std::vector<R> out;
  out.reserve(seeds.size());
  if (jobs <= 1) {
    for (auto s : seeds) out.push_back(fn(s));
    return out;
  }
  for (std::size_t i = 0; i < seeds.size(); i += static_cast<std::size_t>(jobs)) {
    std::vector<std::future<R>> batch;
    for (std::size_t k = i; k < std::min(seeds.size(), i + static_cast<std::size_t>(jobs)); ++k)
      batch.push_back(std::async(std::launch::async, fn, seeds[k]));
    for (auto& f : batch) out.push_back(f.get());
  }
  return out;
}

inline std::uint64_t measurement_seed(std::uint64_t seed) { return splitmix64(seed ^ 0x6d656173ULL); }

// ---------------------------------------------------------------------------
// Beam tracking

struct BeamSlotRow {
  std::int64_t slot = 0;
  int measured_count = 0;
  double overhead_ratio = 0.0;
  BeamIndex predicted;
  double predicted_rsrp_dbm = 0.0;
  BeamIndex true_best;
  double rsrp_error_db = 0.0; // true RSRP lost by using the predicted beam
};

struct BeamSummary {
  double median_rsrp_error_db = 0.0;
  double p95_rsrp_error_db = 0.0;
  double mean_rsrp_error_db = 0.0;
  double overhead_ratio = 0.0;
  double overhead_ratio_excluding_coldstart = 0.0;
  std::int64_t coldstart_slots_to_3db = 0;
  std::int64_t steady_state_slots = 0;

  nlohmann::json to_json() const {
    return {{"median_rsrp_error_db", median_rsrp_error_db},
            {"p95_rsrp_error_db", p95_rsrp_error_db},
            {"mean_rsrp_error_db", mean_rsrp_error_db},
            {"overhead_ratio", overhead_ratio},
            {"overhead_ratio_excluding_coldstart", overhead_ratio_excluding_coldstart},
            {"coldstart_slots_to_3db", coldstart_slots_to_3db},
            {"steady_state_slots", steady_state_slots}};
  }
};

struct BeamSeedResult {
  std::uint64_t seed = 0;
  std::vector<BeamSlotRow> rows;
  BeamSummary summary;
};

/// Slots elapsed until the first slot whose error is within `threshold_db`;
/// horizon + 1 if that never happens.
inline std::int64_t slots_to_threshold(const std::vector<BeamSlotRow>& rows, double threshold_db) {
  for (const auto& r : rows)
    if (r.rsrp_error_db <= threshold_db) return r.slot + 1;
  return static_cast<std::int64_t>(rows.size()) + 1;
}

/// Steady state is every slot at or after `coldstart_slots`.
inline BeamSummary summarize_beam(const std::vector<BeamSlotRow>& rows, int grid_size, int coldstart_slots,
                                  double coldstart_threshold_db) {
  BeamSummary s;
  std::vector<double> steady;
  long measured = 0, measured_steady = 0;
  for (const auto& r : rows) {
    measured += r.measured_count;
    if (r.slot >= coldstart_slots) {
      steady.push_back(r.rsrp_error_db);
      measured_steady += r.measured_count;
    }
  }
  s.steady_state_slots = static_cast<std::int64_t>(steady.size());
  if (!steady.empty()) {
    s.median_rsrp_error_db = percentile(steady, 0.5);
    s.p95_rsrp_error_db = percentile(steady, 0.95);
    double sum = 0.0;
    for (double e : steady) sum += e;
    s.mean_rsrp_error_db = sum / static_cast<double>(steady.size());
    s.overhead_ratio_excluding_coldstart =
        static_cast<double>(measured_steady) / (static_cast<double>(steady.size()) * grid_size);
  }
  if (!rows.empty()) s.overhead_ratio = static_cast<double>(measured) / (static_cast<double>(rows.size()) * grid_size);
  s.coldstart_slots_to_3db = slots_to_threshold(rows, coldstart_threshold_db);
  return s;
}

/// Tracks the scenario for one seed and scores every slot against the exhaustive oracle.
inline BeamSeedResult run_beam_seed(const BeamExperiment& exp, std::uint64_t seed) {
  const ChannelScenario scenario = exp.scenario(seed);
  scenario.validate();
  Rng rng(measurement_seed(seed));
  TrackerState state = make_tracker(exp.tracker);
  BeamSeedResult res;
  res.seed = seed;
  res.rows.reserve(static_cast<std::size_t>(scenario.horizon_slots));
  for (std::int64_t slot = 0; slot < scenario.horizon_slots; ++slot) {
    auto [next, decision] = run_slot(std::move(state), [&](const BeamPoint& p) {
      return measure(scenario, {p.az, p.el}, p.slot, rng);
    });
    const OracleBeam best = best_beam_oracle(scenario, slot);
    BeamSlotRow row;
    row.slot = slot;
    row.measured_count = static_cast<int>(decision.measured.size());
    row.overhead_ratio = static_cast<double>(row.measured_count) / scenario.grid.size();
    row.predicted = decision.predicted_beam;
    row.predicted_rsrp_dbm = decision.predicted_rsrp;
    row.true_best = best.beam;
    row.rsrp_error_db = best.rsrp - rsrp_true(scenario, decision.predicted_beam, slot);
    res.rows.push_back(row);
    state = advance_slot(std::move(next));
  }
  res.summary = summarize_beam(res.rows, scenario.grid.size(), exp.coldstart_slots, exp.coldstart_threshold_db);
  return res;
}

inline std::string beam_decisions_csv(const std::vector<BeamSlotRow>& rows) {
  std::string s = "slot,measured_count,overhead_ratio,predicted_az,predicted_el,predicted_rsrp_dbm,"
                  "true_best_az,true_best_el,rsrp_error_db\n";
  for (const auto& r : rows)
    s += num(static_cast<long long>(r.slot)) + "," + num(r.measured_count) + "," + num(r.overhead_ratio) + "," +
         num(r.predicted.az) + "," + num(r.predicted.el) + "," + num(r.predicted_rsrp_dbm) + "," +
         num(r.true_best.az) + "," + num(r.true_best.el) + "," + num(r.rsrp_error_db) + "\n";
  return s;
}

inline nlohmann::json provenance(const ExperimentConfig& cfg) {
  return {{"version", kToolkitVersion}, {"rng", kRngName}, {"config", cfg.resolved()}};
}

/// Pooled metrics over all seeds plus the per-seed breakdown.
inline nlohmann::json aggregate_beam(const ExperimentConfig& cfg, const std::vector<BeamSeedResult>& results) {
  const auto& exp = cfg.beam;
  std::vector<BeamSlotRow> pooled;
  std::vector<double> coldstarts;
  nlohmann::json per_seed = nlohmann::json::array();
  for (const auto& r : results) {
    // Rows keep their per-seed slot index, so the steady-state cut applies per seed.
    pooled.insert(pooled.end(), r.rows.begin(), r.rows.end());
    coldstarts.push_back(static_cast<double>(r.summary.coldstart_slots_to_3db));
    auto j = r.summary.to_json();
    j["seed"] = r.seed;
    per_seed.push_back(j);
  }
  const BeamSummary all =
      summarize_beam(pooled, exp.tracker.grid.size(), exp.coldstart_slots, exp.coldstart_threshold_db);
  nlohmann::json j = provenance(cfg);
  j["kind"] = "beam";
  j["pooled"] = {{"median_rsrp_error_db", all.median_rsrp_error_db},
                 {"p95_rsrp_error_db", all.p95_rsrp_error_db},
                 {"mean_rsrp_error_db", all.mean_rsrp_error_db},
                 {"overhead_ratio", all.overhead_ratio},
                 {"overhead_ratio_excluding_coldstart", all.overhead_ratio_excluding_coldstart},
                 {"median_coldstart_slots_to_3db", percentile(coldstarts, 0.5)},
                 {"median_coldstart_ms", percentile(coldstarts, 0.5) * kSlotDurationMs},
                 {"steady_state_slots", all.steady_state_slots}};
  j["per_seed"] = per_seed;
  return j;
}

inline nlohmann::json run_beam(const ExperimentConfig& cfg, const fs::path& out, int jobs = 1) {
  const auto results = map_seeds(cfg.seeds, jobs, [&](std::uint64_t seed) { return run_beam_seed(cfg.beam, seed); });
  for (const auto& r : results) {
    const fs::path dir = out / ("seed_" + std::to_string(r.seed));
    write_file(dir / "decisions.csv", beam_decisions_csv(r.rows));
    nlohmann::json j = provenance(cfg);
    j["kind"] = "beam";
    j["seed"] = r.seed;
    j["summary"] = r.summary.to_json();
    write_json(dir / "summary.json", j);
  }
  const nlohmann::json agg = aggregate_beam(cfg, results);
  write_json(out / "summary.json", agg);
  return agg;
}

/// Ground truth for plotting: every (slot, beam) RSRP, plus the oracle beam per slot.
inline void dump_groundtruth(const ExperimentConfig& cfg, const fs::path& out) {
  if (cfg.kind != ExperimentKind::beam) throw ConfigError("dump needs a beam experiment config");
  for (auto seed : cfg.seeds) {
    const ChannelScenario s = cfg.beam.scenario(seed);
    std::string grid = "slot,az,el,rsrp_dbm\n";
    std::string oracle = "slot,best_az,best_el,rsrp_dbm\n";
    for (std::int64_t t = 0; t < s.horizon_slots; ++t) {
      for (int az = 0; az < s.grid.n_az; ++az)
        for (int el = 0; el < s.grid.n_el; ++el)
          grid += num(static_cast<long long>(t)) + "," + num(az) + "," + num(el) + "," + num(rsrp_true(s, {az, el}, t)) + "\n";
      const auto best = best_beam_oracle(s, t);
      oracle += num(static_cast<long long>(t)) + "," + num(best.beam.az) + "," + num(best.beam.el) + "," + num(best.rsrp) + "\n";
    }
    const fs::path dir = out / ("seed_" + std::to_string(seed));
    write_file(dir / "groundtruth.csv", grid);
    write_file(dir / "oracle.csv", oracle);
  }
}

// ---------------------------------------------------------------------------
// Carrier switch-off

struct CarrierDecisionRow {
  std::int64_t period = 0;
  double load = 0.0;
  double rho_min = 0.0;
  double rho_max = 0.0;
  int active_carrier_count = 0;
  bool qos_satisfied = true;
  SwitchAction action = SwitchAction::hold;
};

struct CarrierSeedResult {
  std::uint64_t seed = 0;
  std::vector<KpiReport> policy;
  std::vector<KpiReport> baseline;
  std::vector<CarrierDecisionRow> decisions;
  EnergySummary energy;
  double congestion_rate = 0.0;
  double baseline_congestion_rate = 0.0;
  double dropped = 0.0;
  double baseline_dropped = 0.0;
  double total_demand = 0.0;
  double final_rho_min = 0.0;
  ThresholdBelief final_belief;

  nlohmann::json summary() const {
    return {{"kwh", energy.kwh},
            {"baseline_kwh", energy.baseline_kwh},
            {"saving_fraction", energy.saving_fraction},
            {"off_time_fraction", energy.off_time_fraction},
            {"congestion_rate", congestion_rate},
            {"baseline_congestion_rate", baseline_congestion_rate},
            {"congestion_rate_delta", congestion_rate - baseline_congestion_rate},
            {"dropped_traffic_delta", total_demand > 0.0 ? (dropped - baseline_dropped) / total_demand : 0.0},
            {"final_rho_min", final_rho_min}};
  }
};

/// Resolved inputs that come from files; loaded before anything is written.
struct CarrierInputs {
  std::vector<double> demand_trace;
  std::vector<TraceRow> warm_start;
};

inline fs::path resolve_path(const ExperimentConfig& cfg, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || cfg.base_dir.empty() ? path : cfg.base_dir / path;
}

inline CarrierInputs load_carrier_inputs(const ExperimentConfig& cfg) {
  CarrierInputs in;
  const auto& c = cfg.carrier;
  if (!c.demand_trace_path.empty()) in.demand_trace = read_demand_trace(resolve_path(cfg, c.demand_trace_path));
  if (!c.warm_start_trace.empty()) in.warm_start = read_qos_trace(resolve_path(cfg, c.warm_start_trace));
  return in;
}

/// Uniform prior refined by every historical row, with no forgetting in between.
inline ThresholdBelief warm_start(const BeliefGridSpec& grid, const std::vector<TraceRow>& rows) {
  ThresholdBelief b = uniform_belief(grid);
  for (const auto& r : rows) b = belief_update(std::move(b), {r.rho_used, r.satisfied});
  return b;
}

/// Policy and all-on baseline over the same demand trace.
inline CarrierSeedResult run_carrier_seed(const CarrierExperiment& exp, const CarrierInputs& inputs, std::uint64_t seed) {
  SectorEnv env = exp.env;
  env.traffic.seed = seed;
  env.demand_trace = inputs.demand_trace;

  ThresholdPolicy policy = exp.policy;
  policy.belief = inputs.warm_start.empty() ? uniform_belief(policy.grid) : warm_start(policy.grid, inputs.warm_start);

  SectorState sector{make_switch_state(exp.carriers, policy.rho_min(), policy.rho_max()), std::nullopt};
  // The baseline never switches: rho_min = 0 means load < rho_min is impossible.
  SectorState base{make_switch_state(exp.carriers, 0.0, 1.0), std::nullopt};

  CarrierSeedResult res;
  res.seed = seed;
  std::vector<PowerSample> p_trace, b_trace;
  long congested = 0, b_congested = 0;
  for (std::int64_t t = 0; t < exp.periods(); ++t) {
    sector.switches.rho_min = policy.rho_min();
    sector.switches.rho_max = policy.rho_max();
    PeriodResult r = run_period(env, std::move(sector), t);
    policy.observe(r.observation);
    res.decisions.push_back({t, r.decision_load, r.next.switches.rho_min, r.next.switches.rho_max,
                             r.kpi.active_count, r.observation.satisfied, r.action});
    p_trace.push_back(r.power_sample());
    congested += r.kpi.congested;
    res.dropped += r.kpi.dropped;
    res.total_demand += r.kpi.demand;
    sector = std::move(r.next);
    res.policy.push_back(std::move(r.kpi));

    PeriodResult b = run_period(env, std::move(base), t);
    b_trace.push_back(b.power_sample());
    b_congested += b.kpi.congested;
    res.baseline_dropped += b.kpi.dropped;
    base = std::move(b.next);
    res.baseline.push_back(std::move(b.kpi));
  }
  res.energy = energy_summary(p_trace, b_trace, env.period_hours);
  const auto n = static_cast<double>(exp.periods());
  res.congestion_rate = static_cast<double>(congested) / n;
  res.baseline_congestion_rate = static_cast<double>(b_congested) / n;
  res.final_rho_min = policy.rho_min();
  res.final_belief = policy.belief;
  return res;
}

inline std::string period_csv(const std::vector<KpiReport>& rows) {
  std::string s = "period,demand,active_count,sector_load,max_carrier_load,served,dropped,congested,power_w\n";
  for (const auto& r : rows)
    s += num(static_cast<long long>(r.period)) + "," + num(r.demand) + "," + num(r.active_count) + "," +
         num(r.sector_load) + "," + num(r.max_carrier_load()) + "," + num(r.served) + "," + num(r.dropped) + "," +
         (r.congested ? "1" : "0") + "," + num(r.power_w) + "\n";
  return s;
}

inline std::string carrier_decisions_csv(const std::vector<CarrierDecisionRow>& rows) {
  std::string s = "period,load,rho_min,rho_max,active_carrier_count,qos_satisfied,action\n";
  for (const auto& r : rows)
    s += num(static_cast<long long>(r.period)) + "," + num(r.load) + "," + num(r.rho_min) + "," + num(r.rho_max) + "," +
         num(r.active_carrier_count) + "," + (r.qos_satisfied ? "1" : "0") + "," + to_string(r.action) + "\n";
  return s;
}

inline nlohmann::json aggregate_carrier(const ExperimentConfig& cfg, const std::vector<CarrierSeedResult>& results) {
  double kwh = 0, base_kwh = 0, drop = 0, base_drop = 0, demand_total = 0, cong = 0, base_cong = 0;
  long off = 0, unlocked = 0;
  nlohmann::json per_seed = nlohmann::json::array();
  for (const auto& r : results) {
    kwh += r.energy.kwh;
    base_kwh += r.energy.baseline_kwh;
    drop += r.dropped;
    base_drop += r.baseline_dropped;
    demand_total += r.total_demand;
    cong += r.congestion_rate;
    base_cong += r.baseline_congestion_rate;
    for (std::size_t i = 0; i < r.policy.size(); ++i) {
      const int n_unlocked = static_cast<int>(std::count_if(cfg.carrier.carriers.begin(), cfg.carrier.carriers.end(),
                                                            [](const CarrierConfig& c) { return !c.coverage_locked; }));
      unlocked += n_unlocked;
      off += static_cast<long>(cfg.carrier.carriers.size()) - r.policy[i].active_count;
    }
    auto j = r.summary();
    j["seed"] = r.seed;
    per_seed.push_back(j);
  }
  const double n = static_cast<double>(results.size());
  nlohmann::json j = provenance(cfg);
  j["kind"] = "carrier";
  j["congestion_kpi"] = "proxy: period counts as congested when any carrier load exceeds rho_critical";
  j["pooled"] = {{"kwh", kwh},
                 {"baseline_kwh", base_kwh},
                 {"saving_fraction", base_kwh > 0 ? 1.0 - kwh / base_kwh : 0.0},
                 {"off_time_fraction", unlocked > 0 ? static_cast<double>(off) / static_cast<double>(unlocked) : 0.0},
                 {"congestion_rate", cong / n},
                 {"baseline_congestion_rate", base_cong / n},
                 {"congestion_rate_delta", (cong - base_cong) / n},
                 {"dropped_traffic_delta", demand_total > 0 ? (drop - base_drop) / demand_total : 0.0}};
  j["per_seed"] = per_seed;
  return j;
}

inline nlohmann::json run_carrier(const ExperimentConfig& cfg, const fs::path& out, int jobs = 1) {
  const CarrierInputs inputs = load_carrier_inputs(cfg);
  const auto results =
      map_seeds(cfg.seeds, jobs, [&](std::uint64_t seed) { return run_carrier_seed(cfg.carrier, inputs, seed); });
  for (const auto& r : results) {
    const fs::path dir = out / ("seed_" + std::to_string(r.seed));
    write_file(dir / "periods_policy.csv", period_csv(r.policy));
    write_file(dir / "periods_baseline.csv", period_csv(r.baseline));
    write_file(dir / "decisions.csv", carrier_decisions_csv(r.decisions));
    if (cfg.carrier.dump_belief) write_file(dir / "belief.csv", belief_csv(r.final_belief));
    nlohmann::json j = provenance(cfg);
    j["kind"] = "carrier";
    j["seed"] = r.seed;
    j["summary"] = r.summary();
    write_json(dir / "summary.json", j);
  }
  const nlohmann::json agg = aggregate_carrier(cfg, results);
  write_json(out / "summary.json", agg);
  return agg;
}

// ---------------------------------------------------------------------------
// Sweeps

inline std::string sweep_label(const nlohmann::json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

/// One run per value; emits long-format (axis_value, seed, metric, value) rows.
inline nlohmann::json sweep(const ExperimentConfig& base, const std::string& axis, const std::vector<nlohmann::json>& values,
                            const fs::path& out, int jobs = 1) {
  // Validate every point up front so a bad value leaves no partial output.
  std::vector<ExperimentConfig> points;
  for (const auto& v : values) points.push_back(parse_config(with_parameter(base.resolved(), axis, v), base.base_dir));

  std::string csv = "axis_value,seed,metric,value\n";
  nlohmann::json index = {{"version", kToolkitVersion}, {"axis", axis}, {"runs", nlohmann::json::array()}};
  for (std::size_t i = 0; i < points.size(); ++i) {
    const std::string label = sweep_label(values[i]);
    const fs::path dir = out / (axis + "=" + label);
    const nlohmann::json agg = points[i].kind == ExperimentKind::beam ? run_beam(points[i], dir, jobs)
                                                                      : run_carrier(points[i], dir, jobs);
    for (const auto& seed_summary : agg.at("per_seed")) {
      const std::string seed = std::to_string(seed_summary.at("seed").get<std::uint64_t>());
      for (const auto& [metric, value] : seed_summary.items()) {
        if (metric == "seed" || !value.is_number()) continue;
        csv += label + "," + seed + "," + metric + "," + num(value.get<double>()) + "\n";
      }
    }
    index["runs"].push_back({{"axis_value", values[i]}, {"dir", dir.filename().string()}});
  }
  write_file(out / "sweep.csv", csv);
  write_json(out / "index.json", index);
  return index;
}

} // namespace greenran::harness
