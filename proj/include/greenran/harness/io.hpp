// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "greenran/carrier_switch.hpp"
#include "greenran/errors.hpp"

namespace greenran::harness {

/// Locale-independent number formatting for CSV cells.
inline std::string num(double v) {
  if (v == 0.0) return "0"; // also folds -0
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string num(long long v) { return std::to_string(v); }
inline std::string num(int v) { return std::to_string(v); }

/// Linear-interpolation percentile (the common "type 7" estimator); q in [0, 1].
inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) { write_file(path, j.dump(2) + "\n"); }

/// Minimal CSV reader for the toolkit's own trace formats (no quoting).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows; // data rows, header excluded
};

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    if (first) {
      t.header = split_csv_line(line);
      first = false;
    } else {
      t.rows.push_back(split_csv_line(line));
    }
  }
  return t;
}

inline double parse_double(const std::string& s, std::size_t row, const std::string& column) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(row, "column '" + column + "' is not a number: '" + s + "'");
  }
}

inline bool parse_bool(const std::string& s, std::size_t row, const std::string& column) {
  if (s == "1" || s == "true") return true;
  if (s == "0" || s == "false") return false;
  throw ParseError(row, "column '" + column + "' is not a boolean: '" + s + "'");
}

/// One historical QoS record used to warm-start the threshold belief.
struct TraceRow {
  double load = 0.0;
  double rho_used = 0.0;
  bool satisfied = true;
};

/// Reads `load,rho_used,satisfied` rows. Rows are numbered from 1, header excluded.
inline std::vector<TraceRow> read_qos_trace(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const std::vector<std::string> expect{"load", "rho_used", "satisfied"};
  if (!t.header.empty() && t.header != expect)
    throw ParseError(0, "expected header 'load,rho_used,satisfied'");
  std::vector<TraceRow> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    const std::size_t row = i + 1;
    if (r.size() != 3) throw ParseError(row, "expected 3 columns, found " + std::to_string(r.size()));
    TraceRow tr{parse_double(r[0], row, "load"), parse_double(r[1], row, "rho_used"), parse_bool(r[2], row, "satisfied")};
    if (tr.load < 0.0 || tr.load > 1.0) throw ParseError(row, "load must lie in [0, 1]");
    out.push_back(tr);
  }
  return out;
}

/// Reads a single-column `demand` trace.
inline std::vector<double> read_demand_trace(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  if (t.header != std::vector<std::string>{"demand"}) throw ParseError(0, "expected header 'demand'");
  std::vector<double> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    if (t.rows[i].size() != 1) throw ParseError(i + 1, "expected 1 column");
    out.push_back(parse_double(t.rows[i][0], i + 1, "demand"));
    if (out.back() < 0.0) throw ParseError(i + 1, "demand must be non-negative");
  }
  if (out.empty()) throw ParseError(0, "demand trace is empty");
  return out;
}

/// Dense belief snapshot: one row per (loc, scale) cell.
inline std::string belief_csv(const ThresholdBelief& b) {
  std::string s = "loc,scale,density\n";
  for (std::size_t i = 0; i < b.n_loc(); ++i)
    for (std::size_t j = 0; j < b.n_scale(); ++j)
      s += num(b.loc_grid[i]) + "," + num(b.scale_grid[j]) + "," + num(b.at(i, j)) + "\n";
  return s;
}

} // namespace greenran::harness
