#pragma once

// CSV and JSON reporting. The JSON mirror requires nlohmann/json.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "pathdrift/errors.hpp"
#include "pathdrift/rng.hpp"

namespace pathdrift {

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Shortest round-trip-safe text for a double: 17 significant digits.
inline std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Empty cell, real, integer or text.
using Cell = std::variant<std::monostate, double, long long, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row) {
    if (row.size() != columns.size()) throw DomainError("report: row width does not match header");
    rows.push_back(std::move(row));
  }
};

namespace report_detail {

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string cell_text(const Cell& c) {
  if (std::holds_alternative<double>(c)) return format_real(std::get<double>(c));
  if (std::holds_alternative<long long>(c)) return std::to_string(std::get<long long>(c));
  if (std::holds_alternative<std::string>(c)) return csv_escape(std::get<std::string>(c));
  return "";
}

inline nlohmann::json cell_json(const Cell& c) {
  if (std::holds_alternative<double>(c)) {
    const double v = std::get<double>(c);
    if (!std::isfinite(v)) return format_real(v);
    return v;
  }
  if (std::holds_alternative<long long>(c)) return std::get<long long>(c);
  if (std::holds_alternative<std::string>(c)) return std::get<std::string>(c);
  return nullptr;
}

}  // namespace report_detail

struct ExperimentReport {
  std::string command;
  std::uint64_t config_digest = 0;
  Table table;
  std::optional<long long> wall_ms;  // only filled when timing is requested
  SeedSpec seed;
  std::string artifact_version;

  void write_csv(std::ostream& out) const {
    for (std::size_t j = 0; j < table.columns.size(); ++j) out << (j ? "," : "") << table.columns[j];
    out << '\n';
    for (const auto& row : table.rows) {
      for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << report_detail::cell_text(row[j]);
      out << '\n';
    }
  }

  [[nodiscard]] nlohmann::json to_json() const {
    nlohmann::json j;
    j["command"] = command;
    j["config_digest"] = hex64(config_digest);
    j["seed"] = {{"master_seed", seed.master_seed}, {"stream_index", seed.stream_index}};
    j["artifact_version"] = artifact_version;
    j["wall_ms"] = wall_ms ? nlohmann::json(*wall_ms) : nlohmann::json(nullptr);
    j["columns"] = table.columns;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : table.rows) {
      nlohmann::json r = nlohmann::json::object();
      for (std::size_t c = 0; c < row.size(); ++c) r[table.columns[c]] = report_detail::cell_json(row[c]);
      rows.push_back(std::move(r));
    }
    j["rows"] = std::move(rows);
    return j;
  }
};

}  // namespace pathdrift
