// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0
//
// Structured-text (JSON) configuration. Keys follow the usual names of
// distillation hyper-parameter tables: iterations, batch_size, betas,
// learning_rate, lambda_var, rho, steps_k, temperature.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "dwa/dataset.h"
#include "dwa/synthesis.h"
#include "dwa/training.h"

namespace dwa {

// Compact JSON with sorted keys; `threads` is omitted.
std::string distill_config_json(const DistillConfig& config);
// FNV-1a of distill_config_json.
std::uint64_t config_hash(const DistillConfig& config);
// Re-canonicalizes a stored JSON config block and hashes it.
std::uint64_t config_block_hash(const std::string& json_text);

// Overrides the fields of `base` named in `json_text`. Unknown keys and
// ill-typed values throw InvalidArgument.
DistillConfig distill_config_from_json(const std::string& json_text, DistillConfig base = {});

struct ExperimentConfig {
  std::string arch = "mlp-bn-2";
  std::size_t width = 0;  // 0 selects the preset default
  DatasetSource dataset;  // toy generator parameters live in dataset.toy
  TrainConfig teacher;
  TrainConfig student;
  DistillConfig distill;
  double temperature = 30.0;  // relabeling temperature

  bool operator==(const ExperimentConfig&) const = default;
};

// Sections: "arch", "width", "temperature", "dataset" {format (toy, idx,
// csv), train_images, train_labels, validation_images, validation_labels,
// num_classes, normalize, and the toy generator keys classes, dim, n,
// validation, seed, spread, mode_spread, noise, modes}, "teacher" and
// "student" {epochs, batch_size, learning_rate, betas, weight_decay},
// "distill" (as distill_config_from_json).
ExperimentConfig experiment_config_from_json(const std::string& json_text,
                                             ExperimentConfig base = {});
// Relative dataset paths resolve against the config file's directory.
ExperimentConfig load_experiment_config(const std::string& path);
std::string experiment_config_json(const ExperimentConfig& config);

}  // namespace dwa
