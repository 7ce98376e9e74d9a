// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "greenran/beam_grid.hpp"
#include "greenran/errors.hpp"
#include "greenran/gp_surrogate.hpp"

namespace greenran {

/// Wall-clock length of one tracking slot.
inline constexpr double kSlotDurationMs = 20.0;

struct TrackerConfig {
  BeamGrid grid{8, 8};
  int budget_per_slot = 24; // B
  int window_slots = 4;     // W
  KernelSpec kernel{};
  double prior_mean_dbm = -100.0;
  int n_max = 256;

  double overhead_ratio() const {
    return static_cast<double>(std::min(budget_per_slot, grid.size())) / grid.size();
  }

  /// Largest history the GP ever sees: the W retained slots plus the slot
  /// currently being measured.
  int max_history() const { return (window_slots + 1) * budget_per_slot; }

  void validate() const {
    grid.validate();
    kernel.validate();
    if (budget_per_slot < 1 || budget_per_slot > grid.size())
      throw InvalidArgument("budget_per_slot must be in [1, grid size]");
    if (window_slots < 1) throw InvalidArgument("window_slots must be positive");
    if (n_max < 1) throw InvalidArgument("n_max must be positive");
    if (max_history() > n_max)
      throw InvalidArgument("(window_slots + 1) * budget_per_slot = " + std::to_string(max_history()) +
                            " exceeds the GP cap n_max = " + std::to_string(n_max));
    if (!std::isfinite(prior_mean_dbm)) throw InvalidArgument("prior mean must be finite");
  }
};

/// Tracker value state. Evolved only through the free functions below.
struct TrackerState {
  TrackerConfig config;
  std::vector<RsrpSample> history; // ordered by ingestion
  std::int64_t current_slot = 0;
  std::optional<double> incumbent; // best value known for the current slot

  /// Cold start: nothing is known from earlier slots.
  bool cold() const {
    return std::none_of(history.begin(), history.end(),
                        [&](const RsrpSample& s) { return s.point.slot < current_slot; });
  }

  std::size_t measured_this_slot() const {
    return static_cast<std::size_t>(std::count_if(history.begin(), history.end(), [&](const RsrpSample& s) {
      return s.point.slot == current_slot;
    }));
  }
};

inline TrackerState make_tracker(const TrackerConfig& config) {
  config.validate();
  return TrackerState{config, {}, 0, std::nullopt};
}

struct SlotDecision {
  std::int64_t slot = 0;
  std::vector<RsrpSample> measured;
  BeamIndex predicted_beam;
  double predicted_rsrp = 0.0;
  double overhead_ratio = 0.0;
};

/// Greedy max-min space-filling design on the grid. Starts at the grid centre;
/// each further point maximises its minimum Euclidean index distance to the
/// points already chosen, ties going to the smallest linear index.
inline std::vector<BeamIndex> init_design(const BeamGrid& grid, int count) {
  grid.validate();
  if (count < 0 || count > grid.size())
    throw CountExceedsGrid("design of " + std::to_string(count) + " points on a grid of " +
                           std::to_string(grid.size()));
  std::vector<BeamIndex> chosen;
  if (count == 0) return chosen;
  chosen.reserve(static_cast<std::size_t>(count));
  chosen.push_back({grid.n_az / 2, grid.n_el / 2});

  // Squared distances are integers, so ties are exact.
  std::vector<long> min_d2(static_cast<std::size_t>(grid.size()), std::numeric_limits<long>::max());
  auto relax = [&](BeamIndex p) {
    for (int az = 0; az < grid.n_az; ++az)
      for (int el = 0; el < grid.n_el; ++el) {
        const long da = az - p.az, de = el - p.el;
        auto& d = min_d2[static_cast<std::size_t>(grid.linear(az, el))];
        d = std::min(d, da * da + de * de);
      }
  };
  relax(chosen.back());
  while (static_cast<int>(chosen.size()) < count) {
    int best = -1;
    for (int i = 0; i < grid.size(); ++i)
      if (best < 0 || min_d2[static_cast<std::size_t>(i)] > min_d2[static_cast<std::size_t>(best)]) best = i;
    chosen.push_back({best / grid.n_el, best % grid.n_el});
    relax(chosen.back());
  }
  return chosen;
}

/// Closed-form expected improvement E[max(0, X - incumbent)], X ~ N(mean, variance).
inline double expected_improvement(double mean, double variance, double incumbent) {
  const double gain = mean - incumbent;
  if (!(variance > 0.0)) return std::max(0.0, gain);
  const double sigma = std::sqrt(variance);
  const double z = gain / sigma;
  const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  return std::max(0.0, gain * cdf + sigma * pdf);
}

namespace detail {

inline std::vector<BeamPoint> grid_points(const BeamGrid& grid, std::int64_t slot) {
  std::vector<BeamPoint> pts;
  pts.reserve(static_cast<std::size_t>(grid.size()));
  for (int az = 0; az < grid.n_az; ++az)
    for (int el = 0; el < grid.n_el; ++el) pts.push_back({az, el, slot});
  return pts;
}

inline GpModel fit_history(const TrackerState& state) {
  return GpModel::fit(state.config.kernel, state.config.prior_mean_dbm, state.history);
}

inline double max_mean(const std::vector<PosteriorPoint>& post) {
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& p : post) m = std::max(m, p.mean);
  return m;
}

/// EI argmax over beams not yet measured in `slot`; -1 when every beam is taken.
inline int ei_argmax(const TrackerState& state, const std::vector<PosteriorPoint>& post, double incumbent) {
  const auto& grid = state.config.grid;
  std::vector<char> taken(static_cast<std::size_t>(grid.size()), 0);
  for (const auto& s : state.history)
    if (s.point.slot == state.current_slot)
      taken[static_cast<std::size_t>(grid.linear(s.point.az, s.point.el))] = 1;
  int best = -1;
  double best_ei = -1.0;
  for (int i = 0; i < grid.size(); ++i) {
    if (taken[static_cast<std::size_t>(i)]) continue;
    const auto& p = post[static_cast<std::size_t>(i)];
    const double ei = expected_improvement(p.mean, p.variance, incumbent);
    if (ei > best_ei) {
      best_ei = ei;
      best = i;
    }
  }
  return best;
}

inline std::pair<BeamIndex, double> argmax_mean(const BeamGrid& grid, const std::vector<PosteriorPoint>& post) {
  int best = 0;
  for (int i = 1; i < grid.size(); ++i)
    if (post[static_cast<std::size_t>(i)].mean > post[static_cast<std::size_t>(best)].mean) best = i;
  return {{best / grid.n_el, best % grid.n_el}, post[static_cast<std::size_t>(best)].mean};
}

} // namespace detail

/// Appends one measurement taken in the current slot and raises the
/// slot-local incumbent.
inline TrackerState ingest_measurement(TrackerState state, const BeamPoint& point, double rsrp) {
  if (point.slot != state.current_slot)
    throw SlotMismatch("measurement for slot " + std::to_string(point.slot) + " while tracker is at slot " +
                       std::to_string(state.current_slot));
  if (!state.config.grid.contains(point.az, point.el)) throw InvalidArgument("beam outside grid");
  if (!std::isfinite(rsrp)) throw InvalidArgument("rsrp must be finite");
  for (const auto& s : state.history)
    if (s.point == point)
      throw DuplicateMeasurement("beam (" + std::to_string(point.az) + "," + std::to_string(point.el) +
                                 ") already measured in slot " + std::to_string(point.slot));
  state.history.push_back({point, rsrp});
  state.incumbent = state.incumbent ? std::max(*state.incumbent, rsrp) : rsrp;
  return state;
}

/// Moves to the next slot and drops samples older than the window.
inline TrackerState advance_slot(TrackerState state) {
  ++state.current_slot;
  const std::int64_t oldest = state.current_slot - state.config.window_slots;
  std::erase_if(state.history, [&](const RsrpSample& s) { return s.point.slot < oldest; });
  state.incumbent.reset();
  return state;
}

/// Beam with the highest posterior mean at `slot`, with that mean.
inline std::pair<BeamIndex, double> predict_best(const GpModel& model, const BeamGrid& grid, std::int64_t slot) {
  const auto pts = detail::grid_points(grid, slot);
  return detail::argmax_mean(grid, model.posterior(pts));
}

inline std::pair<BeamIndex, double> predict_best(const TrackerState& state, std::int64_t slot) {
  if (state.history.empty()) throw EmptyHistory("cannot predict a beam without measurements");
  return predict_best(detail::fit_history(state), state.config.grid, slot);
}

/// Result of one slot's acquisition: the evolved state, the samples taken in
/// order, and the posterior over the grid conditioned on all of them.
struct Acquisition {
  TrackerState state;
  std::vector<RsrpSample> taken;
  std::vector<PosteriorPoint> grid_posterior;
};

/// Runs one slot's acquisition loop against `measure(BeamPoint) -> double`.
/// Cold start takes the space-filling design; otherwise each of the B picks
/// maximises expected improvement under a GP refreshed after every
/// measurement.
template <typename MeasureFn>
Acquisition acquire(TrackerState state, MeasureFn&& measure) {
  const auto& cfg = state.config;
  const std::int64_t slot = state.current_slot;
  const int budget = std::min(cfg.budget_per_slot, cfg.grid.size());
  const auto pts = detail::grid_points(cfg.grid, slot);
  Acquisition out;
  out.taken.reserve(static_cast<std::size_t>(budget));

  if (state.cold() && state.measured_this_slot() == 0) {
    for (const auto& b : init_design(cfg.grid, budget)) {
      const BeamPoint p{b.az, b.el, slot};
      const double y = measure(p);
      state = ingest_measurement(std::move(state), p, y);
      out.taken.push_back({p, y});
    }
    out.grid_posterior = detail::fit_history(state).posterior(pts);
    out.state = std::move(state);
    return out;
  }

  QueryPosterior post(detail::fit_history(state), pts);
  if (!state.incumbent) state.incumbent = detail::max_mean(post.values());

  while (static_cast<int>(state.measured_this_slot()) < budget) {
    const int pick = detail::ei_argmax(state, post.values(), *state.incumbent);
    if (pick < 0) break;
    const BeamPoint p{pts[static_cast<std::size_t>(pick)]};
    const double y = measure(p);
    state = ingest_measurement(std::move(state), p, y);
    out.taken.push_back({p, y});
    post.condition_on_query(static_cast<std::size_t>(pick), y);
  }
  out.grid_posterior = post.values();
  out.state = std::move(state);
  return out;
}

/// Beams the tracker would measure in `slot`, in order, given the outcomes
/// `measure` reports. Leaves `state` untouched.
template <typename MeasureFn>
std::vector<BeamPoint> select_measurements(const TrackerState& state, std::int64_t slot, MeasureFn&& measure) {
  if (slot != state.current_slot)
    throw SlotMismatch("selection requested for slot " + std::to_string(slot) + " while tracker is at slot " +
                       std::to_string(state.current_slot));
  const auto result = acquire(state, std::forward<MeasureFn>(measure));
  std::vector<BeamPoint> out;
  out.reserve(result.taken.size());
  for (const auto& s : result.taken) out.push_back(s.point);
  return out;
}

/// Full per-slot step: acquire, predict from the final posterior (the same
/// conditional predict_best would refit), and report. The caller advances.
template <typename MeasureFn>
std::pair<TrackerState, SlotDecision> run_slot(TrackerState state, MeasureFn&& measure) {
  auto result = acquire(std::move(state), std::forward<MeasureFn>(measure));
  SlotDecision d;
  d.slot = result.state.current_slot;
  d.overhead_ratio = result.state.config.overhead_ratio();
  const auto [beam, rsrp] = detail::argmax_mean(result.state.config.grid, result.grid_posterior);
  d.predicted_beam = beam;
  d.predicted_rsrp = rsrp;
  d.measured = std::move(result.taken);
  return {std::move(result.state), std::move(d)};
}

} // namespace greenran
