// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic-set directories:
//   instances.bin    "DWATNSR\0" u32 rank  u64 dims[rank]  f64 data[]
//   labels.bin       "DWALABL\0" u64 n  i32 labels[n]
//   soft_labels.bin  tensor format as instances.bin (optional)
//   manifest.json    run manifest, synthesis record and the config block

#pragma once

#include <string>

#include "dwa/synthesis.h"

namespace dwa {

std::string encode_tensor(const Tensor& t);
Tensor decode_tensor(const std::string& bytes, const std::string& origin);

std::string synthesis_manifest_json(const SyntheticSet& set);

void save_synthetic(const SyntheticSet& set, const std::string& dir);
// Verifies N = ipc x classes, exactly ipc instances per class, matching
// label/soft-label counts and the stored config hash.
SyntheticSet load_synthetic(const std::string& dir);

}  // namespace dwa
