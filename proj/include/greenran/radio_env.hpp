// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "greenran/beam_grid.hpp"
#include "greenran/errors.hpp"
#include "greenran/rng.hpp"

namespace greenran {

/// A Gaussian hotspot in beam-index space that drifts linearly while alive.
struct Lobe {
  double peak_dbm = -70.0;
  double center_az0 = 0.0;
  double center_el0 = 0.0;
  double drift_az = 0.0; // beam indices per slot
  double drift_el = 0.0;
  double width_az = 1.5;
  double width_el = 1.5;
  std::int64_t birth_slot = 0;
  std::int64_t death_slot = std::numeric_limits<std::int64_t>::max();

  bool alive(std::int64_t slot) const noexcept { return slot >= birth_slot && slot < death_slot; }

  // Drift is measured from the birth slot, so c(birth) = c0.
  double center_az(std::int64_t slot) const noexcept {
    return center_az0 + drift_az * static_cast<double>(slot - birth_slot);
  }
  double center_el(std::int64_t slot) const noexcept {
    return center_el0 + drift_el * static_cast<double>(slot - birth_slot);
  }

  void validate() const {
    if (!(width_az > 0.0) || !(width_el > 0.0)) throw InvalidArgument("lobe widths must be positive");
    if (!(birth_slot < death_slot)) throw InvalidArgument("lobe birth_slot must precede death_slot");
    if (!std::isfinite(peak_dbm)) throw InvalidArgument("lobe peak must be finite");
  }
};

/// Immutable ground-truth RSRP landscape plus the measurement noise level.
struct ChannelScenario {
  BeamGrid grid;
  std::vector<Lobe> lobes;
  double floor_dbm = -110.0;
  double measurement_noise_db = 0.5;
  std::int64_t horizon_slots = 500;
  std::uint64_t seed = 0;

  void validate() const {
    grid.validate();
    if (horizon_slots < 1) throw InvalidArgument("scenario horizon must be positive");
    if (!(measurement_noise_db >= 0.0)) throw InvalidArgument("measurement noise must be non-negative");
    for (const auto& l : lobes) l.validate();
    // Lobe lifetimes are intervals; sweep them to find uncovered slots.
    std::vector<std::pair<std::int64_t, std::int64_t>> spans;
    for (const auto& l : lobes) spans.emplace_back(l.birth_slot, l.death_slot);
    std::sort(spans.begin(), spans.end());
    std::int64_t covered = 0;
    for (const auto& [b, d] : spans) {
      if (b > covered) break;
      covered = std::max(covered, d);
    }
    if (covered < horizon_slots)
      throw InvalidArgument("scenario has no live lobe at slot " + std::to_string(covered));
  }
};

namespace detail {
inline void check_horizon(const ChannelScenario& s, std::int64_t slot) {
  if (slot < 0 || slot >= s.horizon_slots)
    throw OutOfHorizon("slot " + std::to_string(slot) + " outside scenario horizon");
}
inline double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }
} // namespace detail

/// Noise-free RSRP in dBm: linear-power sum of every live lobe plus the floor.
inline double rsrp_true(const ChannelScenario& s, BeamIndex beam, std::int64_t slot) {
  detail::check_horizon(s, slot);
  double mw = detail::dbm_to_mw(s.floor_dbm);
  for (const auto& l : s.lobes) {
    if (!l.alive(slot)) continue;
    const double da = (beam.az - l.center_az(slot)) / l.width_az;
    const double de = (beam.el - l.center_el(slot)) / l.width_el;
    mw += detail::dbm_to_mw(l.peak_dbm) * std::exp(-0.5 * (da * da + de * de));
  }
  return 10.0 * std::log10(mw);
}

struct OracleBeam {
  BeamIndex beam;
  double rsrp = 0.0;
};

/// Exhaustive sweep: the strongest beam, ties to the smallest linear index.
inline OracleBeam best_beam_oracle(const ChannelScenario& s, std::int64_t slot) {
  detail::check_horizon(s, slot);
  OracleBeam best{{0, 0}, -std::numeric_limits<double>::infinity()};
  for (int az = 0; az < s.grid.n_az; ++az)
    for (int el = 0; el < s.grid.n_el; ++el) {
      const double v = rsrp_true(s, {az, el}, slot);
      if (v > best.rsrp) best = {{az, el}, v};
    }
  return best;
}

/// One noisy measurement. Draws from `rng` even when the noise level is zero
/// so streams stay aligned across noise settings.
inline double measure(const ChannelScenario& s, BeamIndex beam, std::int64_t slot, Rng& rng) {
  const double truth = rsrp_true(s, beam, slot);
  return truth + s.measurement_noise_db * rng.normal();
}

/// Lobe drift magnitude in beam indices per 20 ms slot for a named UE mobility.
inline double mobility_preset(std::string_view name) {
  if (name == "pedestrian") return 0.01;
  if (name == "urban") return 0.2;
  if (name == "highway") return 0.6;
  throw UnknownPreset("unknown mobility preset '" + std::string(name) + "'");
}

/// Appearance of one persistent multipath component; its position and heading
/// are redrawn every time it is reborn.
struct LobeTemplate {
  double peak_dbm = -70.0;
  double width_az = 1.5;
  double width_el = 1.5;
};

/// Seeded renewal process: each template yields a chain of back-to-back lobes.
/// A lobe starts at a uniform grid position, drifts at `drift_speed` in a
/// uniform direction and dies when it leaves the grid, with its lifetime
/// clamped to [min_lifetime, max_lifetime].
struct ScenarioGenerator {
  BeamGrid grid;
  std::vector<LobeTemplate> templates{{-70.0, 1.5, 1.5}, {-76.0, 1.5, 1.5}};
  double drift_speed = 0.2;
  std::int64_t min_lifetime = 10;
  std::int64_t max_lifetime = 200;
  double floor_dbm = -110.0;
  double measurement_noise_db = 0.5;
  std::int64_t horizon_slots = 500;

  void validate() const {
    grid.validate();
    if (templates.empty()) throw InvalidArgument("scenario needs at least one lobe template");
    for (const auto& t : templates)
      if (!(t.width_az > 0.0) || !(t.width_el > 0.0))
        throw InvalidArgument("lobe widths must be positive");
    if (!(drift_speed >= 0.0)) throw InvalidArgument("drift speed must be non-negative");
    if (min_lifetime < 1 || max_lifetime < min_lifetime)
      throw InvalidArgument("lobe lifetimes must satisfy 1 <= min <= max");
    if (horizon_slots < 1) throw InvalidArgument("scenario horizon must be positive");
    if (!(measurement_noise_db >= 0.0)) throw InvalidArgument("measurement noise must be non-negative");
  }

  ChannelScenario generate(std::uint64_t seed) const {
    validate();
    ChannelScenario s;
    s.grid = grid;
    s.floor_dbm = floor_dbm;
    s.measurement_noise_db = measurement_noise_db;
    s.horizon_slots = horizon_slots;
    s.seed = seed;
    Rng rng(splitmix64(seed ^ 0x5ce7a110b5ULL));
    for (const auto& t : templates) {
      std::int64_t birth = 0;
      while (birth < horizon_slots) {
        Lobe l;
        l.peak_dbm = t.peak_dbm;
        l.width_az = t.width_az;
        l.width_el = t.width_el;
        l.center_az0 = rng.uniform(0.0, grid.n_az - 1.0);
        l.center_el0 = rng.uniform(0.0, grid.n_el - 1.0);
        double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
        if (grid.n_el == 1) heading = heading < std::numbers::pi ? 0.0 : std::numbers::pi;
        if (grid.n_az == 1) heading = heading < std::numbers::pi ? 0.5 * std::numbers::pi : 1.5 * std::numbers::pi;
        l.drift_az = drift_speed * std::cos(heading);
        l.drift_el = drift_speed * std::sin(heading);
        const double exit = std::min(exit_time(l.center_az0, l.drift_az, grid.n_az),
                                     exit_time(l.center_el0, l.drift_el, grid.n_el));
        const double clamped = std::clamp(exit, static_cast<double>(min_lifetime),
                                          static_cast<double>(max_lifetime));
        l.birth_slot = birth;
        l.death_slot = birth + static_cast<std::int64_t>(std::ceil(clamped));
        s.lobes.push_back(l);
        birth = l.death_slot;
      }
    }
    return s;
  }

private:
  static double exit_time(double c, double v, int n) {
    if (std::abs(v) < 1e-12) return std::numeric_limits<double>::infinity();
    const double edge = v > 0.0 ? n - 0.5 : -0.5;
    return (edge - c) / v;
  }
};

} // namespace greenran
