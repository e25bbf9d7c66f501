// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dwa {

struct MetricRow {
  std::string variant;
  std::uint64_t seed = 0;
  std::string metric;
  double value = 0.0;

  bool operator==(const MetricRow&) const = default;
};

enum class ReportFormat { kCsv, kJson };

// Columns: variant,seed,metric,value. Doubles use the shortest text that
// round-trips; the JSON form holds the same rows in the same order.
std::string render_csv(std::span<const MetricRow> rows);
std::string render_json(std::span<const MetricRow> rows);
std::vector<MetricRow> parse_report_csv(const std::string& text);
std::vector<MetricRow> parse_report_json(const std::string& text);

// Throws Error when `path` cannot be written.
void emit_report(std::span<const MetricRow> rows, ReportFormat format, const std::string& path);

}  // namespace dwa
