// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "greenran/errors.hpp"

namespace greenran {

struct CarrierConfig {
  double freq_mhz = 0.0;
  bool coverage_locked = false;
  int switch_order = 0; // lower is switched off later
  double capacity_units = 50.0;

  friend bool operator==(const CarrierConfig&, const CarrierConfig&) = default;
};

struct Carrier {
  CarrierConfig config;
  bool active = true;

  friend bool operator==(const Carrier&, const Carrier&) = default;
};

enum class SwitchAction { hold, off, on };

inline const char* to_string(SwitchAction a) {
  switch (a) {
  case SwitchAction::off: return "off";
  case SwitchAction::on: return "on";
  default: return "hold";
  }
}

/// Hysteresis state: one sector's carriers and its (rho_min, rho_max) pair.
struct SwitchState {
  std::vector<Carrier> carriers;
  double rho_min = 0.0;
  double rho_max = 1.0;

  void validate() const {
    if (!(rho_min >= 0.0 && rho_max <= 1.0 && rho_min < rho_max))
      throw InvalidArgument("thresholds must satisfy 0 <= rho_min < rho_max <= 1");
    for (const auto& c : carriers) {
      if (!(c.config.capacity_units > 0.0)) throw InvalidArgument("carrier capacity must be positive");
      if (c.config.coverage_locked && !c.active) throw InvalidArgument("coverage-locked carrier is inactive");
    }
  }

  std::size_t active_count() const {
    return static_cast<std::size_t>(std::count_if(carriers.begin(), carriers.end(), [](const Carrier& c) { return c.active; }));
  }

  std::size_t unlocked_count() const {
    return static_cast<std::size_t>(
        std::count_if(carriers.begin(), carriers.end(), [](const Carrier& c) { return !c.config.coverage_locked; }));
  }

  friend bool operator==(const SwitchState&, const SwitchState&) = default;
};

/// All carriers on, with validated thresholds.
inline SwitchState make_switch_state(std::vector<CarrierConfig> configs, double rho_min, double rho_max) {
  SwitchState s;
  for (auto& c : configs) s.carriers.push_back({c, true});
  s.rho_min = rho_min;
  s.rho_max = rho_max;
  s.validate();
  return s;
}

/// Which carrier the next hysteresis step would toggle, if any.
inline SwitchAction hysteresis_action(const SwitchState& state, double load, std::size_t* index = nullptr) {
  if (load < state.rho_min) {
    std::optional<std::size_t> pick;
    for (std::size_t i = 0; i < state.carriers.size(); ++i) {
      const auto& c = state.carriers[i];
      if (!c.active || c.config.coverage_locked) continue;
      if (!pick || c.config.switch_order > state.carriers[*pick].config.switch_order) pick = i;
    }
    if (pick) {
      if (index) *index = *pick;
      return SwitchAction::off;
    }
  } else if (load > state.rho_max) {
    std::optional<std::size_t> pick;
    for (std::size_t i = 0; i < state.carriers.size(); ++i) {
      const auto& c = state.carriers[i];
      if (c.active) continue;
      if (!pick || c.config.switch_order < state.carriers[*pick].config.switch_order) pick = i;
    }
    if (pick) {
      if (index) *index = *pick;
      return SwitchAction::on;
    }
  }
  return SwitchAction::hold;
}

/// Switches at most one carrier: the unlocked active carrier with the highest
/// switch_order goes off below rho_min, the inactive carrier with the lowest
/// switch_order comes back above rho_max.
inline SwitchState hysteresis_step(SwitchState state, double load) {
  std::size_t i = 0;
  switch (hysteresis_action(state, load, &i)) {
  case SwitchAction::off: state.carriers[i].active = false; break;
  case SwitchAction::on: state.carriers[i].active = true; break;
  case SwitchAction::hold: break;
  }
  return state;
}

/// rho_max from a learned rho_min and a fixed deadband.
inline double derive_upper(double rho_min, double gap) {
  if (!(gap > 0.0)) throw InvalidArgument("deadband gap must be positive");
  if (rho_min + gap > 1.0)
    throw GapOverflow("rho_min + gap = " + std::to_string(rho_min + gap) + " exceeds 1");
  return rho_min + gap;
}

/// Logistic QoS-satisfaction probability, decreasing in the switch-off threshold.
inline double qos_probability(double loc, double scale, double rho) {
  // Written in the form that cannot overflow for either sign of the exponent.
  const double x = (rho - loc) / scale;
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

/// 1 - qos_probability, without cancellation when the probability is near 1.
inline double qos_failure_probability(double loc, double scale, double rho) {
  return qos_probability(loc, -scale, rho);
}

struct QosObservation {
  double rho_used = 0.0;
  bool satisfied = true;
};

/// Discrete posterior over the logistic parameters (loc, scale). Density is
/// stored loc-major: density[i * n_scale + j] is the mass at (loc_i, scale_j).
struct ThresholdBelief {
  std::vector<double> loc_grid;
  std::vector<double> scale_grid;
  std::vector<double> density;

  std::size_t n_loc() const noexcept { return loc_grid.size(); }
  std::size_t n_scale() const noexcept { return scale_grid.size(); }
  double& at(std::size_t i, std::size_t j) { return density[i * n_scale() + j]; }
  double at(std::size_t i, std::size_t j) const { return density[i * n_scale() + j]; }
  double r_lo() const { return loc_grid.front(); }
  double r_hi() const { return loc_grid.back(); }

  double mass() const {
    double m = 0.0;
    for (double d : density) m += d;
    return m;
  }

  double entropy() const {
    double h = 0.0;
    for (double d : density)
      if (d > 0.0) h -= d * std::log(d);
    return h;
  }
};

struct BeliefGridSpec {
  double r_lo = 0.02;
  double r_hi = 0.8;
  std::size_t n_loc = 61;
  double scale_lo = 0.01;
  double scale_hi = 0.3;
  std::size_t n_scale = 15;

  void validate() const {
    if (!(0.0 <= r_lo && r_lo < r_hi && r_hi <= 1.0)) throw InvalidArgument("search region must satisfy 0 <= r_lo < r_hi <= 1");
    if (!(0.0 < scale_lo && scale_lo <= scale_hi)) throw InvalidArgument("scale range must satisfy 0 < lo <= hi");
    if (n_loc < 2 || n_scale < 1) throw InvalidArgument("belief grid needs n_loc >= 2 and n_scale >= 1");
  }
};

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i)
    v[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return v;
}

inline ThresholdBelief uniform_belief(const BeliefGridSpec& spec) {
  spec.validate();
  ThresholdBelief b;
  b.loc_grid = linspace(spec.r_lo, spec.r_hi, spec.n_loc);
  b.scale_grid = linspace(spec.scale_lo, spec.scale_hi, spec.n_scale);
  b.density.assign(spec.n_loc * spec.n_scale, 1.0 / static_cast<double>(spec.n_loc * spec.n_scale));
  return b;
}

/// Bayes update with the Bernoulli likelihood of one QoS outcome.
inline ThresholdBelief belief_update(ThresholdBelief belief, const QosObservation& obs) {
  double total = 0.0;
  for (std::size_t i = 0; i < belief.n_loc(); ++i)
    for (std::size_t j = 0; j < belief.n_scale(); ++j) {
      const double loc = belief.loc_grid[i], scale = belief.scale_grid[j];
      double& d = belief.at(i, j);
      d *= obs.satisfied ? qos_probability(loc, scale, obs.rho_used)
                         : qos_failure_probability(loc, scale, obs.rho_used);
      total += d;
    }
  if (!(total >= 1e-300)) throw DegenerateLikelihood("posterior mass vanished; reset the belief");
  for (double& d : belief.density) d /= total;
  return belief;
}

namespace detail {

/// Sampled zero-mean Gaussian weights on integer offsets, normalised to 1.
/// sigma == 0 gives the identity kernel.
inline std::vector<double> gaussian_taps(double sigma) {
  if (!(sigma > 0.0)) return {1.0};
  const int half = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> w(static_cast<std::size_t>(2 * half + 1));
  double total = 0.0;
  for (int k = -half; k <= half; ++k) {
    const double x = k / sigma;
    w[static_cast<std::size_t>(k + half)] = std::exp(-0.5 * x * x);
    total += w[static_cast<std::size_t>(k + half)];
  }
  for (double& x : w) x /= total;
  return w;
}

/// Half-sample symmetric reflection of an index into [0, n).
inline std::size_t reflect(long j, long n) {
  const long period = 2 * n;
  long m = j % period;
  if (m < 0) m += period;
  return static_cast<std::size_t>(m < n ? m : period - 1 - m);
}

/// Convolves along one axis of a row-major n_outer x n_inner array.
inline void convolve_axis(std::vector<double>& data, std::size_t n_loc, std::size_t n_scale, bool along_loc,
                          const std::vector<double>& taps) {
  if (taps.size() == 1) return;
  const long half = static_cast<long>(taps.size() / 2);
  std::vector<double> out(data.size(), 0.0);
  const long n = static_cast<long>(along_loc ? n_loc : n_scale);
  for (std::size_t i = 0; i < n_loc; ++i)
    for (std::size_t j = 0; j < n_scale; ++j) {
      const double v = data[i * n_scale + j];
      if (v == 0.0) continue;
      const long src = static_cast<long>(along_loc ? i : j);
      for (long k = -half; k <= half; ++k) {
        const std::size_t dst = reflect(src + k, n);
        const std::size_t idx = along_loc ? dst * n_scale + j : i * n_scale + dst;
        out[idx] += v * taps[static_cast<std::size_t>(k + half)];
      }
    }
  data = std::move(out);
}

} // namespace detail

/// Markov forgetting step: separable zero-mean Gaussian blur of the density,
/// standard deviations in grid cells, mass reflected at the grid edges.
inline ThresholdBelief belief_transition(ThresholdBelief belief, double sigma_loc, double sigma_scale) {
  if (!(sigma_loc >= 0.0) || !(sigma_scale >= 0.0)) throw InvalidArgument("transition std devs must be non-negative");
  if (sigma_loc == 0.0 && sigma_scale == 0.0) return belief;
  detail::convolve_axis(belief.density, belief.n_loc(), belief.n_scale(), true, detail::gaussian_taps(sigma_loc));
  detail::convolve_axis(belief.density, belief.n_loc(), belief.n_scale(), false, detail::gaussian_taps(sigma_scale));
  const double total = belief.mass();
  for (double& d : belief.density) d /= total;
  return belief;
}

/// Belief-averaged probability that QoS holds when switching off at `rho`.
inline double predicted_satisfaction(const ThresholdBelief& belief, double rho) {
  double s = 0.0;
  for (std::size_t i = 0; i < belief.n_loc(); ++i)
    for (std::size_t j = 0; j < belief.n_scale(); ++j) {
      const double d = belief.at(i, j);
      if (d != 0.0) s += d * qos_probability(belief.loc_grid[i], belief.scale_grid[j], rho);
    }
  return std::clamp(s, 0.0, 1.0);
}

/// Absolute tolerance of the threshold root search.
inline constexpr double kThresholdTolerance = 1e-4;

/// Largest rho in [r_lo, r_hi] whose predicted satisfaction still reaches
/// `delta`, by bisection on the monotone mixture. std::nullopt means no
/// threshold in the region is safe.
inline std::optional<double> select_threshold(const ThresholdBelief& belief, double delta, double r_lo, double r_hi) {
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0, 1)");
  if (!(r_lo < r_hi)) throw InvalidArgument("empty search region");
  if (predicted_satisfaction(belief, r_lo) < delta) return std::nullopt;
  if (predicted_satisfaction(belief, r_hi) >= delta) return r_hi;
  double safe = r_lo, unsafe = r_hi;
  while (unsafe - safe > kThresholdTolerance) {
    const double mid = 0.5 * (safe + unsafe);
    (predicted_satisfaction(belief, mid) >= delta ? safe : unsafe) = mid;
  }
  return safe;
}

inline std::optional<double> select_threshold(const ThresholdBelief& belief, double delta) {
  return select_threshold(belief, delta, belief.r_lo(), belief.r_hi());
}

/// Online threshold learner: picks rho_min from the belief, then folds in
/// each period's QoS outcome and applies the forgetting transition.
struct ThresholdPolicy {
  BeliefGridSpec grid{};
  ThresholdBelief belief = uniform_belief(BeliefGridSpec{});
  double delta = 0.95;
  double gap = 0.15;
  double sigma_loc = 0.5;
  double sigma_scale = 0.25;
  std::optional<double> pinned_rho_min; // disables learning when set

  void validate() const {
    grid.validate();
    if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0, 1)");
    if (!(gap > 0.0 && gap < 1.0)) throw InvalidArgument("gap must lie in (0, 1)");
    if (!(sigma_loc >= 0.0) || !(sigma_scale >= 0.0)) throw InvalidArgument("transition std devs must be non-negative");
    if (pinned_rho_min && !(*pinned_rho_min >= 0.0 && *pinned_rho_min + gap <= 1.0))
      throw InvalidArgument("pinned rho_min must satisfy 0 <= rho_min <= 1 - gap");
  }

  /// Threshold to apply next. With no safe root the most conservative point
  /// of the search region is used; rho_min is clipped so rho_max stays <= 1.
  double rho_min() const {
    if (pinned_rho_min) return *pinned_rho_min;
    const double rho = select_threshold(belief, delta).value_or(belief.r_lo());
    return std::min(rho, 1.0 - gap);
  }

  double rho_max() const { return derive_upper(rho_min(), gap); }

  void observe(const QosObservation& obs) {
    if (pinned_rho_min) return;
    try {
      belief = belief_update(std::move(belief), obs);
    } catch (const DegenerateLikelihood&) {
      belief = uniform_belief(grid);
    }
    belief = belief_transition(std::move(belief), sigma_loc, sigma_scale);
  }
};

inline ThresholdPolicy make_policy(const BeliefGridSpec& grid) {
  ThresholdPolicy p;
  p.grid = grid;
  p.belief = uniform_belief(grid);
  return p;
}

} // namespace greenran
