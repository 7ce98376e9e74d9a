// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "greenran/beam_tracker.hpp"
#include "greenran/errors.hpp"
#include "greenran/network_env.hpp"
#include "greenran/radio_env.hpp"

namespace greenran::harness {

using nlohmann::json;

inline constexpr const char* kToolkitVersion = "greenran 0.1.0";

enum class ExperimentKind { beam, carrier };

/// Beam-tracking experiment. Either `explicit_lobes` is non-empty, or the
/// scenario comes from the seeded renewal generator.
struct BeamExperiment {
  ScenarioGenerator generator{};
  std::string mobility = "urban";
  std::vector<Lobe> explicit_lobes;
  TrackerConfig tracker{};
  int coldstart_slots = 15;
  double coldstart_threshold_db = 3.0;

  ChannelScenario scenario(std::uint64_t seed) const {
    if (explicit_lobes.empty()) return generator.generate(seed);
    ChannelScenario s;
    s.grid = generator.grid;
    s.lobes = explicit_lobes;
    s.floor_dbm = generator.floor_dbm;
    s.measurement_noise_db = generator.measurement_noise_db;
    s.horizon_slots = generator.horizon_slots;
    s.seed = seed;
    return s;
  }
};

struct CarrierExperiment {
  int days = 30;
  std::vector<CarrierConfig> carriers = default_carriers();
  SectorEnv env{};
  ThresholdPolicy policy{};
  bool policy_enabled = true;
  std::string demand_trace_path; // as written in the config
  std::string warm_start_trace;  // as written in the config
  bool dump_belief = false;

  std::int64_t periods() const { return static_cast<std::int64_t>(days) * env.traffic.period_slots; }
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::beam;
  std::vector<std::uint64_t> seeds{1};
  BeamExperiment beam;
  CarrierExperiment carrier;
  std::filesystem::path base_dir; // relative paths in the config resolve here

  /// Canonical, fully defaulted form of this config.
  json resolved() const;
};

namespace detail {

/// Reads keys from one JSON object and rejects any it was not asked about.
class ObjectReader {
public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + "expected an object");
  }

  ~ObjectReader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError(where() + "unknown key '" + k + "'");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where() + "key '" + key + "' has the wrong type");
    }
  }

  const json& at(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
  std::string where() const { return path_.empty() ? "config: " : "config." + path_ + ": "; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline void read_kernel(const json& j, const std::string& path, KernelSpec& k) {
  ObjectReader r(j, path);
  r.get("lengthscale_az", k.lengthscale_az);
  r.get("lengthscale_el", k.lengthscale_el);
  r.get("lengthscale_time", k.lengthscale_time);
  r.get("signal_variance", k.signal_variance);
  r.get("noise_variance", k.noise_variance);
}

inline void read_beam(ObjectReader& top, BeamExperiment& b) {
  if (top.has("scenario")) {
    ObjectReader r(top.at("scenario"), "scenario");
    auto& g = b.generator;
    if (r.has("grid")) {
      ObjectReader gr(r.at("grid"), r.child("grid"));
      gr.get("n_az", g.grid.n_az);
      gr.get("n_el", g.grid.n_el);
    }
    r.get("mobility", b.mobility);
    g.drift_speed = mobility_preset(b.mobility);
    r.get("drift_speed", g.drift_speed); // explicit value overrides the preset
    r.get("floor_dbm", g.floor_dbm);
    r.get("noise_db", g.measurement_noise_db);
    r.get("horizon_slots", g.horizon_slots);
    r.get("min_lifetime", g.min_lifetime);
    r.get("max_lifetime", g.max_lifetime);
    if (r.has("lobe_templates")) {
      g.templates.clear();
      const auto& arr = r.at("lobe_templates");
      if (!arr.is_array()) throw ConfigError("config.scenario.lobe_templates: expected an array");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        ObjectReader lr(arr[i], r.child("lobe_templates[" + std::to_string(i) + "]"));
        LobeTemplate t;
        lr.get("peak_dbm", t.peak_dbm);
        lr.get("width_az", t.width_az);
        lr.get("width_el", t.width_el);
        g.templates.push_back(t);
      }
    }
    if (r.has("lobes")) {
      const auto& arr = r.at("lobes");
      if (!arr.is_array()) throw ConfigError("config.scenario.lobes: expected an array");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        ObjectReader lr(arr[i], r.child("lobes[" + std::to_string(i) + "]"));
        Lobe l;
        lr.get("peak_dbm", l.peak_dbm);
        lr.get("center_az0", l.center_az0);
        lr.get("center_el0", l.center_el0);
        lr.get("drift_az", l.drift_az);
        lr.get("drift_el", l.drift_el);
        lr.get("width_az", l.width_az);
        lr.get("width_el", l.width_el);
        lr.get("birth_slot", l.birth_slot);
        std::int64_t death = -1;
        lr.get("death_slot", death);
        l.death_slot = death < 0 ? g.horizon_slots : death;
        b.explicit_lobes.push_back(l);
      }
    }
  }
  if (top.has("tracker")) {
    ObjectReader r(top.at("tracker"), "tracker");
    r.get("budget_per_slot", b.tracker.budget_per_slot);
    r.get("window_slots", b.tracker.window_slots);
    r.get("n_max", b.tracker.n_max);
    r.get("prior_mean_dbm", b.tracker.prior_mean_dbm);
    if (r.has("kernel")) read_kernel(r.at("kernel"), r.child("kernel"), b.tracker.kernel);
  }
  b.tracker.grid = b.generator.grid;
  if (top.has("metrics")) {
    ObjectReader r(top.at("metrics"), "metrics");
    r.get("coldstart_slots", b.coldstart_slots);
    r.get("coldstart_threshold_db", b.coldstart_threshold_db);
  }
}

inline void read_pair(ObjectReader& r, const std::string& key, double& lo, double& hi) {
  if (!r.has(key)) return;
  const auto& v = r.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ConfigError("config: '" + key + "' must be a two-element numeric array");
  lo = v[0].get<double>();
  hi = v[1].get<double>();
}

inline void read_carrier(ObjectReader& top, CarrierExperiment& c) {
  top.get("days", c.days);
  if (top.has("sector")) {
    ObjectReader r(top.at("sector"), "sector");
    if (r.has("carriers")) {
      c.carriers.clear();
      const auto& arr = r.at("carriers");
      if (!arr.is_array()) throw ConfigError("config.sector.carriers: expected an array");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        ObjectReader cr(arr[i], r.child("carriers[" + std::to_string(i) + "]"));
        CarrierConfig cc;
        cr.get("freq_mhz", cc.freq_mhz);
        cr.get("coverage_locked", cc.coverage_locked);
        cr.get("switch_order", cc.switch_order);
        cr.get("capacity_units", cc.capacity_units);
        c.carriers.push_back(cc);
      }
    }
    r.get("rho_critical", c.env.rho_critical);
    std::string mode = "deterministic";
    r.get("qos_mode", mode);
    if (mode == "deterministic")
      c.env.qos_mode = QosMode::deterministic;
    else if (mode == "bernoulli")
      c.env.qos_mode = QosMode::bernoulli;
    else
      throw ConfigError("config.sector.qos_mode: expected 'deterministic' or 'bernoulli'");
    r.get("bernoulli_width", c.env.bernoulli_width);
    double minutes = c.env.period_hours * 60.0;
    r.get("period_minutes", minutes);
    c.env.period_hours = minutes / 60.0;
  }
  if (top.has("traffic")) {
    ObjectReader r(top.at("traffic"), "traffic");
    auto& t = c.env.traffic;
    r.get("mean_demand", t.mean_demand);
    r.get("diurnal_amplitude", t.diurnal_amplitude);
    r.get("periods_per_day", t.period_slots);
    r.get("trough_period", t.trough_slot);
    r.get("noise_std", t.noise_std);
    r.get("demand_trace", c.demand_trace_path);
  }
  if (top.has("energy")) {
    ObjectReader r(top.at("energy"), "energy");
    r.get("p_static_w", c.env.energy.p_static_w);
    r.get("p_dynamic_slope", c.env.energy.p_dynamic_slope);
    r.get("p_tx_max_w", c.env.energy.p_tx_max_w);
    r.get("p_sleep_w", c.env.energy.p_sleep_w);
  }
  if (top.has("policy")) {
    ObjectReader r(top.at("policy"), "policy");
    auto& p = c.policy;
    r.get("enabled", c.policy_enabled);
    r.get("delta", p.delta);
    r.get("gap", p.gap);
    read_pair(r, "region", p.grid.r_lo, p.grid.r_hi);
    r.get("n_loc", p.grid.n_loc);
    read_pair(r, "scale_range", p.grid.scale_lo, p.grid.scale_hi);
    r.get("n_scale", p.grid.n_scale);
    r.get("sigma_loc", p.sigma_loc);
    r.get("sigma_scale", p.sigma_scale);
    if (r.has("pinned_rho_min")) {
      double v = 0.0;
      r.get("pinned_rho_min", v);
      p.pinned_rho_min = v;
    }
    r.get("warm_start_trace", c.warm_start_trace);
    r.get("dump_belief", c.dump_belief);
  }
  if (!c.policy_enabled) c.policy.pinned_rho_min = 0.0;
}

inline json kernel_json(const KernelSpec& k) {
  return {{"lengthscale_az", k.lengthscale_az},   {"lengthscale_el", k.lengthscale_el},
          {"lengthscale_time", k.lengthscale_time}, {"signal_variance", k.signal_variance},
          {"noise_variance", k.noise_variance}};
}

} // namespace detail

/// Parses and validates a config document. Every module invariant is checked
/// here, before any experiment touches the filesystem.
inline ExperimentConfig parse_config(const json& doc, std::filesystem::path base_dir = {}) {
  ExperimentConfig cfg;
  cfg.base_dir = std::move(base_dir);
  try {
    detail::ObjectReader top(doc, "");
    std::string kind;
    top.get("kind", kind);
    if (kind == "beam")
      cfg.kind = ExperimentKind::beam;
    else if (kind == "carrier")
      cfg.kind = ExperimentKind::carrier;
    else
      throw ConfigError("config.kind: expected 'beam' or 'carrier'");
    top.get("seeds", cfg.seeds);
    if (cfg.seeds.empty()) throw ConfigError("config.seeds: at least one seed is required");
    if (cfg.kind == ExperimentKind::beam)
      detail::read_beam(top, cfg.beam);
    else
      detail::read_carrier(top, cfg.carrier);
  } catch (const UnknownPreset& e) {
    throw ConfigError(std::string("config.scenario.mobility: ") + e.what());
  }

  try {
    if (cfg.kind == ExperimentKind::beam) {
      const auto& b = cfg.beam;
      b.tracker.validate();
      if (b.coldstart_slots < 0) throw InvalidArgument("metrics.coldstart_slots must be non-negative");
      if (b.explicit_lobes.empty())
        b.generator.validate();
      else
        b.scenario(cfg.seeds.front()).validate();
    } else {
      auto& c = cfg.carrier;
      if (c.days < 1) throw InvalidArgument("days must be positive");
      if (c.carriers.empty()) throw InvalidArgument("sector needs at least one carrier");
      c.env.validate();
      c.policy.validate();
      c.policy.belief = uniform_belief(c.policy.grid);
      make_switch_state(c.carriers, c.policy.rho_min(), c.policy.rho_max());
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  return cfg;
}

inline json ExperimentConfig::resolved() const {
  json j;
  j["seeds"] = seeds;
  if (kind == ExperimentKind::beam) {
    const auto& b = beam;
    const auto& g = b.generator;
    j["kind"] = "beam";
    json templates = json::array();
    for (const auto& t : g.templates)
      templates.push_back({{"peak_dbm", t.peak_dbm}, {"width_az", t.width_az}, {"width_el", t.width_el}});
    json lobes = json::array();
    for (const auto& l : b.explicit_lobes)
      lobes.push_back({{"peak_dbm", l.peak_dbm},     {"center_az0", l.center_az0}, {"center_el0", l.center_el0},
                       {"drift_az", l.drift_az},     {"drift_el", l.drift_el},     {"width_az", l.width_az},
                       {"width_el", l.width_el},     {"birth_slot", l.birth_slot}, {"death_slot", l.death_slot}});
    j["scenario"] = {{"grid", {{"n_az", g.grid.n_az}, {"n_el", g.grid.n_el}}},
                     {"mobility", b.mobility},
                     {"drift_speed", g.drift_speed},
                     {"floor_dbm", g.floor_dbm},
                     {"noise_db", g.measurement_noise_db},
                     {"horizon_slots", g.horizon_slots},
                     {"min_lifetime", g.min_lifetime},
                     {"max_lifetime", g.max_lifetime},
                     {"lobe_templates", templates},
                     {"lobes", lobes}};
    j["tracker"] = {{"budget_per_slot", b.tracker.budget_per_slot},
                    {"window_slots", b.tracker.window_slots},
                    {"n_max", b.tracker.n_max},
                    {"prior_mean_dbm", b.tracker.prior_mean_dbm},
                    {"kernel", detail::kernel_json(b.tracker.kernel)}};
    j["metrics"] = {{"coldstart_slots", b.coldstart_slots}, {"coldstart_threshold_db", b.coldstart_threshold_db}};
  } else {
    const auto& c = carrier;
    j["kind"] = "carrier";
    j["days"] = c.days;
    json carriers = json::array();
    for (const auto& cc : c.carriers)
      carriers.push_back({{"freq_mhz", cc.freq_mhz},
                          {"coverage_locked", cc.coverage_locked},
                          {"switch_order", cc.switch_order},
                          {"capacity_units", cc.capacity_units}});
    j["sector"] = {{"carriers", carriers},
                   {"rho_critical", c.env.rho_critical},
                   {"qos_mode", c.env.qos_mode == QosMode::bernoulli ? "bernoulli" : "deterministic"},
                   {"bernoulli_width", c.env.bernoulli_width},
                   {"period_minutes", c.env.period_hours * 60.0}};
    const auto& t = c.env.traffic;
    j["traffic"] = {{"mean_demand", t.mean_demand},   {"diurnal_amplitude", t.diurnal_amplitude},
                    {"periods_per_day", t.period_slots}, {"trough_period", t.trough_slot},
                    {"noise_std", t.noise_std},       {"demand_trace", c.demand_trace_path}};
    const auto& e = c.env.energy;
    j["energy"] = {{"p_static_w", e.p_static_w},
                   {"p_dynamic_slope", e.p_dynamic_slope},
                   {"p_tx_max_w", e.p_tx_max_w},
                   {"p_sleep_w", e.p_sleep_w}};
    const auto& p = c.policy;
    j["policy"] = {{"enabled", c.policy_enabled},
                   {"delta", p.delta},
                   {"gap", p.gap},
                   {"region", {p.grid.r_lo, p.grid.r_hi}},
                   {"n_loc", p.grid.n_loc},
                   {"scale_range", {p.grid.scale_lo, p.grid.scale_hi}},
                   {"n_scale", p.grid.n_scale},
                   {"sigma_loc", p.sigma_loc},
                   {"sigma_scale", p.sigma_scale},
                   {"pinned_rho_min", p.pinned_rho_min ? json(*p.pinned_rho_min) : json(nullptr)},
                   {"warm_start_trace", c.warm_start_trace},
                   {"dump_belief", c.dump_belief}};
  }
  return j;
}

/// Parses config text; `//` and `/* */` comments are allowed.
inline json parse_config_text(const std::string& text) {
  try {
    return json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(parse_config_text(ss.str()), path.parent_path());
}

/// Sets a dotted path (e.g. "tracker.budget_per_slot") in a resolved config.
/// Throws UnknownParameter when the path names no existing scalar.
inline json with_parameter(json resolved, const std::string& dotted, const json& value) {
  json* node = &resolved;
  std::stringstream ss(dotted);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (!node->is_object() || !node->contains(part)) throw UnknownParameter("unknown parameter '" + dotted + "'");
    node = &(*node)[part];
  }
  if (node->is_object() || node->is_array() || node == &resolved)
    throw UnknownParameter("parameter '" + dotted + "' is not a scalar");
  *node = value;
  // A sweep over the mobility preset must not be masked by the resolved speed.
  if (dotted == "scenario.mobility") resolved["scenario"].erase("drift_speed");
  return resolved;
}

} // namespace greenran::harness
