// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "greenran/carrier_switch.hpp"
#include "greenran/errors.hpp"
#include "greenran/rng.hpp"

namespace greenran {

/// Diurnal sinusoid plus white noise, in carrier capacity units.
struct TrafficProfile {
  double mean_demand = 100.0;
  double diurnal_amplitude = 70.0;
  std::int64_t period_slots = 96; // one day of 15 minute periods
  std::int64_t trough_slot = 16;  // 04:00
  double noise_std = 6.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(mean_demand > 0.0)) throw InvalidArgument("mean_demand must be positive");
    if (!(diurnal_amplitude >= 0.0 && diurnal_amplitude <= mean_demand))
      throw InvalidArgument("diurnal_amplitude must lie in [0, mean_demand]");
    if (period_slots < 1) throw InvalidArgument("period_slots must be positive");
    if (!(noise_std >= 0.0)) throw InvalidArgument("noise_std must be non-negative");
  }

  /// Phase that puts the sinusoid minimum at `trough_slot`.
  double phase() const {
    return 1.5 * std::numbers::pi -
           2.0 * std::numbers::pi * static_cast<double>(trough_slot) / static_cast<double>(period_slots);
  }
};

inline double demand(const TrafficProfile& p, std::int64_t t) {
  const double angle = 2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(p.period_slots) + p.phase();
  const double noise = p.noise_std > 0.0 ? p.noise_std * hashed_normal(p.seed, static_cast<std::uint64_t>(t)) : 0.0;
  return std::max(0.0, p.mean_demand + p.diurnal_amplitude * std::sin(angle) + noise);
}

/// Per-carrier power: static draw plus a PA term proportional to load while
/// active, a sleep draw while off.
struct EnergyModel {
  double p_static_w = 100.0;
  double p_dynamic_slope = 4.0;
  double p_tx_max_w = 20.0;
  double p_sleep_w = 10.0;

  void validate() const {
    if (!(p_static_w > 0.0) || !(p_dynamic_slope > 0.0) || !(p_tx_max_w > 0.0))
      throw InvalidArgument("energy model powers must be positive");
    if (!(p_sleep_w >= 0.0 && p_sleep_w < p_static_w)) throw InvalidArgument("p_sleep_w must lie in [0, p_static_w)");
  }
};

/// Outcome of spreading demand over the active carriers.
struct LoadSplit {
  std::vector<double> per_carrier_load; // one entry per carrier, 0 when inactive
  double sector_load = 0.0;
  double served = 0.0;
  double dropped = 0.0;

  double max_load() const {
    double m = 0.0;
    for (double l : per_carrier_load) m = std::max(m, l);
    return m;
  }
};

/// Equal-utilisation fill: every active carrier runs at demand / total capacity.
inline LoadSplit distribute_load(double demand_units, const SwitchState& state) {
  double capacity = 0.0;
  for (const auto& c : state.carriers)
    if (c.active) capacity += c.config.capacity_units;
  if (!(capacity > 0.0)) throw NoActiveCarriers("no active carrier to carry traffic");
  LoadSplit s;
  const double util = std::min(1.0, demand_units / capacity);
  for (const auto& c : state.carriers) s.per_carrier_load.push_back(c.active ? util : 0.0);
  s.sector_load = util;
  s.served = std::min(demand_units, capacity);
  s.dropped = demand_units - s.served;
  return s;
}

/// QoS holds when no carrier exceeds rho_critical (inclusive) and nothing is dropped.
inline bool qos_outcome(std::span<const double> loads, double dropped, double rho_critical) {
  const bool overloaded = std::any_of(loads.begin(), loads.end(), [&](double l) { return l > rho_critical; });
  return !overloaded && !(dropped > 0.0);
}

inline double power_draw(const EnergyModel& m, const SwitchState& state, std::span<const double> loads) {
  double w = 0.0;
  for (std::size_t i = 0; i < state.carriers.size(); ++i) {
    if (state.carriers[i].active)
      w += m.p_static_w + m.p_dynamic_slope * loads[i] * m.p_tx_max_w;
    else
      w += m.p_sleep_w;
  }
  return w;
}

/// What the energy accounting needs from each period.
struct PowerSample {
  double power_w = 0.0;
  int unlocked_off = 0;
  int unlocked_total = 0;
};

struct EnergySummary {
  double kwh = 0.0;
  double baseline_kwh = 0.0;
  double saving_fraction = 0.0;
  double off_time_fraction = 0.0;
};

/// Plain sum of power x period length for both traces.
inline EnergySummary energy_summary(std::span<const PowerSample> policy, std::span<const PowerSample> baseline,
                                    double period_hours) {
  if (policy.size() != baseline.size())
    throw LengthMismatch("policy trace has " + std::to_string(policy.size()) + " periods, baseline " +
                         std::to_string(baseline.size()));
  EnergySummary e;
  long off = 0, total = 0;
  for (const auto& p : policy) {
    e.kwh += p.power_w * period_hours / 1000.0;
    off += p.unlocked_off;
    total += p.unlocked_total;
  }
  for (const auto& b : baseline) e.baseline_kwh += b.power_w * period_hours / 1000.0;
  e.saving_fraction = e.baseline_kwh > 0.0 ? 1.0 - e.kwh / e.baseline_kwh : 0.0;
  e.off_time_fraction = total > 0 ? static_cast<double>(off) / static_cast<double>(total) : 0.0;
  return e;
}

enum class QosMode { deterministic, bernoulli };

/// Sector environment: traffic, power model and QoS rule.
struct SectorEnv {
  TrafficProfile traffic{};
  EnergyModel energy{};
  double rho_critical = 0.9;
  QosMode qos_mode = QosMode::deterministic;
  // Bernoulli mode: P(fail) is a logistic in (max_load - rho_critical) with this width.
  double bernoulli_width = 0.03;
  double period_hours = 0.25;
  std::vector<double> demand_trace; // replaces the profile when non-empty, cycled

  double demand_at(std::int64_t period) const {
    if (demand_trace.empty()) return demand(traffic, period);
    return demand_trace[static_cast<std::size_t>(period) % demand_trace.size()];
  }

  void validate() const {
    traffic.validate();
    for (double d : demand_trace)
      if (!(d >= 0.0) || !std::isfinite(d)) throw InvalidArgument("demand trace values must be finite and >= 0");
    energy.validate();
    if (!(rho_critical > 0.0 && rho_critical <= 1.0)) throw InvalidArgument("rho_critical must lie in (0, 1]");
    if (!(bernoulli_width > 0.0)) throw InvalidArgument("bernoulli_width must be positive");
    if (!(period_hours > 0.0)) throw InvalidArgument("period_hours must be positive");
  }
};

struct KpiReport {
  std::int64_t period = 0;
  double demand = 0.0;
  std::vector<double> per_carrier_load;
  double sector_load = 0.0;
  double served = 0.0;
  double dropped = 0.0;
  bool congested = false;
  int active_count = 0;
  double power_w = 0.0;

  double max_carrier_load() const {
    double m = 0.0;
    for (double l : per_carrier_load) m = std::max(m, l);
    return m;
  }
};

/// Sector state carried between periods.
struct SectorState {
  SwitchState switches;
  std::optional<double> last_sector_load; // drives the next hysteresis step
};

struct PeriodResult {
  KpiReport kpi;
  QosObservation observation;
  SwitchAction action = SwitchAction::hold;
  double decision_load = 0.0; // load the hysteresis step saw
  SectorState next;

  PowerSample power_sample() const {
    PowerSample p;
    p.power_w = kpi.power_w;
    for (std::size_t i = 0; i < next.switches.carriers.size(); ++i) {
      const auto& c = next.switches.carriers[i];
      if (c.config.coverage_locked) continue;
      ++p.unlocked_total;
      if (!c.active) ++p.unlocked_off;
    }
    return p;
  }
};

/// One period: demand, a hysteresis step on the previous period's sector load,
/// load split, QoS and power. The observation credits the rho_min in force.
inline PeriodResult run_period(const SectorEnv& env, SectorState sector, std::int64_t period) {
  PeriodResult r;
  const double d = env.demand_at(period);
  if (sector.last_sector_load) {
    r.decision_load = *sector.last_sector_load;
    r.action = hysteresis_action(sector.switches, r.decision_load);
    sector.switches = hysteresis_step(std::move(sector.switches), r.decision_load);
  }
  const LoadSplit split = distribute_load(d, sector.switches);

  bool satisfied = qos_outcome(split.per_carrier_load, split.dropped, env.rho_critical);
  if (env.qos_mode == QosMode::bernoulli) {
    const double x = (split.max_load() - env.rho_critical) / env.bernoulli_width;
    const double p_fail = 1.0 / (1.0 + std::exp(-x));
    const double u = static_cast<double>(splitmix64(env.traffic.seed ^ splitmix64(~static_cast<std::uint64_t>(period))) >> 11) * 0x1.0p-53;
    satisfied = !(u < p_fail);
  }

  r.kpi.period = period;
  r.kpi.demand = d;
  r.kpi.per_carrier_load = split.per_carrier_load;
  r.kpi.sector_load = split.sector_load;
  r.kpi.served = split.served;
  r.kpi.dropped = split.dropped;
  r.kpi.congested = split.max_load() > env.rho_critical;
  r.kpi.active_count = static_cast<int>(sector.switches.active_count());
  r.kpi.power_w = power_draw(env.energy, sector.switches, split.per_carrier_load);
  r.observation = {sector.switches.rho_min, satisfied};
  sector.last_sector_load = split.sector_load;
  r.next = std::move(sector);
  return r;
}

/// Default sector layout: 800 and 1800 MHz hold coverage, 2600 MHz goes first.
inline std::vector<CarrierConfig> default_carriers() {
  return {{800.0, true, 0, 50.0}, {1800.0, true, 0, 50.0}, {2100.0, false, 1, 50.0}, {2600.0, false, 2, 50.0}};
}

} // namespace greenran
