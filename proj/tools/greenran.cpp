// SPDX-License-Identifier: Apache-2.0
//
// greenran: experiment runner for the beam-tracking and carrier switch-off
// toolkits. Exit codes: 0 success, 2 config error, 3 runtime error.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "greenran/harness/config.hpp"
#include "greenran/harness/experiments.hpp"
#include "greenran/harness/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace greenran;
using namespace greenran::harness;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

int report(const std::string& kind, const std::string& message, int code, json extra = json::object()) {
  json err = {{"kind", kind}, {"message", message}, {"exit_code", code}};
  err.update(extra);
  std::cerr << json{{"error", err}}.dump() << "\n";
  return code;
}

struct Options {
  std::string config;
  std::vector<std::uint64_t> seeds;
  std::string out = "out";
  bool quiet = false;
  int jobs = 1;
  std::string axis;
  std::string values;
  std::string trace;
};

ExperimentConfig load(const Options& o) {
  ExperimentConfig cfg = load_config(o.config);
  if (!o.seeds.empty()) cfg.seeds = o.seeds;
  return cfg;
}

void require_kind(const ExperimentConfig& cfg, ExperimentKind kind, const char* command) {
  if (cfg.kind != kind) throw ConfigError(std::string(command) + " needs a config with kind '" +
                                          (kind == ExperimentKind::beam ? "beam" : "carrier") + "'");
}

/// Splits "a,b,c"; cells that parse as JSON (numbers, true/false) keep that type.
std::vector<json> parse_values(const std::string& text) {
  std::vector<json> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    cell = trim(cell);
    if (cell.empty()) continue;
    json v = json::parse(cell, nullptr, false);
    out.push_back(v.is_discarded() || v.is_structured() ? json(cell) : v);
  }
  if (out.empty()) throw ConfigError("--values needs at least one value");
  return out;
}

void print(const Options& o, const json& j) {
  if (!o.quiet) std::cout << j.dump(2) << "\n";
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"greenran: Bayesian beam tracking and carrier switch-off experiments"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub, bool needs_out) {
    sub->add_option("--config", o.config, "Experiment config file (JSON, // comments allowed)")->required();
    sub->add_option("--seed", o.seeds, "Seed to run; repeatable, overrides the config's seed list");
    if (needs_out) sub->add_option("--out", o.out, "Output directory")->capture_default_str();
    sub->add_flag("--quiet", o.quiet, "Do not print the summary");
    sub->add_option("--jobs", o.jobs, "Seeds to run concurrently")->capture_default_str()->check(CLI::PositiveNumber);
  };

  auto* beam = app.add_subcommand("beam", "Beam tracking vs exhaustive search");
  common(beam, true);
  auto* carrier = app.add_subcommand("carrier", "Carrier switch-off policy vs all-on baseline");
  common(carrier, true);
  auto* sweep_cmd = app.add_subcommand("sweep", "Run an experiment once per value of one parameter");
  common(sweep_cmd, true);
  sweep_cmd->add_option("--axis", o.axis, "Dotted parameter path, e.g. tracker.budget_per_slot")->required();
  sweep_cmd->add_option("--values", o.values, "Comma-separated values")->required();
  auto* dump = app.add_subcommand("dump", "Dump ground-truth RSRP and oracle beams");
  common(dump, true);
  auto* warm = app.add_subcommand("warm-start", "Build a threshold belief from a historical QoS trace");
  common(warm, true);
  warm->add_option("--trace", o.trace, "CSV with columns load,rho_used,satisfied")->required();
  auto* validate = app.add_subcommand("validate", "Check a config and print its resolved form");
  common(validate, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    const ExperimentConfig cfg = load(o);
    const fs::path out(o.out);

    if (validate->parsed()) {
      print(o, cfg.resolved());
    } else if (beam->parsed()) {
      require_kind(cfg, ExperimentKind::beam, "beam");
      print(o, run_beam(cfg, out, o.jobs).at("pooled"));
    } else if (carrier->parsed()) {
      require_kind(cfg, ExperimentKind::carrier, "carrier");
      load_carrier_inputs(cfg); // surfaces trace errors before anything is written
      print(o, run_carrier(cfg, out, o.jobs).at("pooled"));
    } else if (sweep_cmd->parsed()) {
      if (cfg.kind == ExperimentKind::carrier) load_carrier_inputs(cfg);
      print(o, sweep(cfg, o.axis, parse_values(o.values), out, o.jobs));
    } else if (dump->parsed()) {
      require_kind(cfg, ExperimentKind::beam, "dump");
      dump_groundtruth(cfg, out);
    } else if (warm->parsed()) {
      require_kind(cfg, ExperimentKind::carrier, "warm-start");
      const auto rows = read_qos_trace(o.trace);
      const ThresholdBelief b = warm_start(cfg.carrier.policy.grid, rows);
      write_file(out / "belief.csv", belief_csv(b));
      const auto rho = select_threshold(b, cfg.carrier.policy.delta);
      json j = {{"version", kToolkitVersion},
                {"rows", rows.size()},
                {"rho_min", rho ? json(*rho) : json(nullptr)},
                {"config", cfg.resolved()}};
      write_json(out / "belief.json", j);
      print(o, j);
    }
  } catch (const ParseError& e) {
    return report("ParseError", e.what(), kExitConfig, {{"row", e.row()}});
  } catch (const ConfigError& e) {
    return report("ConfigError", e.what(), kExitConfig);
  } catch (const UnknownParameter& e) {
    return report("UnknownParameter", e.what(), kExitConfig);
  } catch (const std::exception& e) {
    return report("RuntimeError", e.what(), kExitRuntime);
  }
  return 0;
}
