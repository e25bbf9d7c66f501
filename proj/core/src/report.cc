// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#include "dwa/report.h"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>

#include <nlohmann/json.hpp>

#include "dwa/binary_io.h"
#include "dwa/errors.h"
#include "dwa/manifest.h"
#include "text_format.h"

namespace dwa {
namespace {

using json = nlohmann::json;

constexpr const char* kHeader = "variant,seed,metric,value";

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string json_string(const std::string& s) { return json(s).dump(); }

// Splits one CSV record starting at `pos`; advances past its line break.
std::vector<std::string> read_record(const std::string& text, std::size_t& pos, std::size_t line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  while (pos < text.size()) {
    const char c = text[pos++];
    if (quoted) {
      if (c == '"') {
        if (pos < text.size() && text[pos] == '"') {
          fields.back() += '"';
          ++pos;
        } else {
          quoted = false;
        }
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c == '\n') {
      return fields;
    } else if (c != '\r') {
      fields.back() += c;
    }
  }
  if (quoted) throw DataError("report CSV: line " + std::to_string(line) + ": unterminated quote");
  return fields;
}

double parse_value(const std::string& s, std::size_t line) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw DataError("report CSV: line " + std::to_string(line) + ": bad value '" + s + "'");
  }
  return v;
}

std::uint64_t parse_seed(const std::string& s, std::size_t line) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) {
    throw DataError("report CSV: line " + std::to_string(line) + ": bad seed '" + s + "'");
  }
  return v;
}

}  // namespace

std::string render_csv(std::span<const MetricRow> rows) {
  std::string out = std::string(kHeader) + "\n";
  for (const MetricRow& r : rows) {
    if (!std::isfinite(r.value)) throw InvalidArgument("report: non-finite value for " + r.metric);
    out += csv_field(r.variant) + "," + std::to_string(r.seed) + "," + csv_field(r.metric) + "," +
           detail::format_double(r.value + 0.0) + "\n";
  }
  return out;
}

std::string render_json(std::span<const MetricRow> rows) {
  std::string out = "{\"columns\":[\"variant\",\"seed\",\"metric\",\"value\"],\"rows\":[";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const MetricRow& r = rows[i];
    if (!std::isfinite(r.value)) throw InvalidArgument("report: non-finite value for " + r.metric);
    if (i > 0) out += ",";
    out += "\n[" + json_string(r.variant) + "," + std::to_string(r.seed) + "," +
           json_string(r.metric) + "," + detail::format_double(r.value + 0.0) + "]";
  }
  return out + "\n]}\n";
}

std::vector<MetricRow> parse_report_csv(const std::string& text) {
  std::size_t pos = 0, line = 1;
  const std::vector<std::string> header = read_record(text, pos, line);
  if (header.size() != 4 || header[0] != "variant" || header[1] != "seed" ||
      header[2] != "metric" || header[3] != "value") {
    throw DataError("report CSV: line 1: expected header " + std::string(kHeader));
  }
  std::vector<MetricRow> rows;
  while (pos < text.size()) {
    ++line;
    const std::vector<std::string> f = read_record(text, pos, line);
    if (f.size() == 1 && f[0].empty()) continue;
    if (f.size() != 4) {
      throw DataError("report CSV: line " + std::to_string(line) + ": expected 4 fields");
    }
    rows.push_back({f[0], parse_seed(f[1], line), f[2], parse_value(f[3], line)});
  }
  return rows;
}

std::vector<MetricRow> parse_report_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("columns") != json{"variant", "seed", "metric", "value"}) {
      throw DataError("report JSON: unexpected columns");
    }
    std::vector<MetricRow> rows;
    for (const json& r : j.at("rows")) {
      rows.push_back({r.at(0).get<std::string>(), r.at(1).get<std::uint64_t>(),
                      r.at(2).get<std::string>(), r.at(3).get<double>()});
    }
    return rows;
  } catch (const json::exception& e) {
    throw DataError(std::string("report JSON: ") + e.what());
  }
}

void emit_report(std::span<const MetricRow> rows, ReportFormat format, const std::string& path) {
  write_file(path, format == ReportFormat::kCsv ? render_csv(rows) : render_json(rows));
}

std::string tool_version() {
#ifdef DWA_VERSION
  return DWA_VERSION;
#else
  return "unknown";
#endif
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::uint64_t parse_hex64(const std::string& text) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v, 16);
  if (ec != std::errc() || p != text.data() + text.size() || text.size() != 16) {
    throw DataError("bad 64-bit hex value '" + text + "'");
  }
  return v;
}

std::string manifest_to_json(const RunManifest& m) {
  json timings = json::object();
  for (const auto& [phase, seconds] : m.timings) timings[phase] = seconds;
  const json j{{"command", m.command},
               {"config_hash", hex64(m.config_hash)},
               {"seeds", m.seeds},
               {"tool_version", m.tool_version},
               {"teacher_fingerprint", hex64(m.teacher_fingerprint)},
               {"timings", timings},
               {"created_at", m.created_at}};
  return j.dump(2);
}

RunManifest manifest_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.config_hash = parse_hex64(j.at("config_hash").get<std::string>());
    m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    m.tool_version = j.at("tool_version").get<std::string>();
    m.teacher_fingerprint = parse_hex64(j.at("teacher_fingerprint").get<std::string>());
    for (const auto& [phase, seconds] : j.at("timings").items()) m.timings[phase] = seconds.get<double>();
    m.created_at = j.at("created_at").get<std::string>();
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("run manifest: ") + e.what());
  }
}

}  // namespace dwa
