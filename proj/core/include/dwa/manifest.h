// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace dwa {

// Provenance attached to every artifact a run produces. Timings and the
// creation timestamp are informational; everything else is a pure function
// of the run's inputs.
struct RunManifest {
  std::string command;
  std::uint64_t config_hash = 0;
  std::vector<std::uint64_t> seeds;
  std::string tool_version;
  std::uint64_t teacher_fingerprint = 0;
  std::map<std::string, double> timings;  // seconds per phase
  std::string created_at;                 // UTC, ISO 8601

  bool operator==(const RunManifest&) const = default;
};

std::string tool_version();
std::string utc_timestamp();

std::string manifest_to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const std::string& text);

std::string hex64(std::uint64_t value);
std::uint64_t parse_hex64(const std::string& text);

}  // namespace dwa
