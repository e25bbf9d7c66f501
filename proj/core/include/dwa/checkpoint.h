// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0
//
// Binary model checkpoints:
//   "DWACKPT\0"  u32 version  u64 header_len  header (JSON: arch, BN layout,
//   layout hash, BN constants, training metadata)
//   payload: u64 n  f64[n] params  u64 layers  {u64 c  f64[c] mean  f64[c] var}*
//   u64 FNV-1a checksum of the payload
// All integers and floats little-endian.

#pragma once

#include <cstdint>
#include <string>

#include "dwa/model.h"

namespace dwa {

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::uint64_t layout_hash(const ArchSpec& arch);

std::string serialize_model(const Model& model);
// Throws DataError on bad magic, version mismatch, truncation, layout-hash
// mismatch or checksum failure.
Model deserialize_model(const std::string& bytes, const std::string& origin = "checkpoint");

void save_teacher(const TeacherModel& model, const std::string& path);
TeacherModel load_teacher(const std::string& path);

// Architecture description as JSON text (used in checkpoints and manifests).
std::string arch_to_json(const ArchSpec& arch);
ArchSpec arch_from_json(const std::string& text);

}  // namespace dwa
