// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include "dwa/model.h"
#include "dwa/optim.h"

namespace dwa {

// Mini-batch Adam(W) with a cosine-decayed learning rate over all steps.
struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 64;
  double learning_rate = 0.01;
  AdamConfig adam;
  bool cosine = true;
  std::uint64_t seed = 0;
  // Temperature applied to student logits when training on soft labels.
  double temperature = 1.0;
  // train_teacher only: full-batch Adam steps in running-statistics mode
  // after the epochs, cosine-decayed from refine_learning_rate.
  std::size_t refine_steps = 0;
  double refine_learning_rate = 1e-2;

  bool operator==(const TrainConfig&) const = default;
};

// Trains `model` in place on hard labels (cross-entropy) or, when
// `soft_targets` is given, on probability targets (soft cross-entropy, which
// has the KL gradient). BN runs on batch statistics and running statistics
// are updated with momentum model.bn_momentum. Batches are reshuffled each
// epoch from `config.seed`. Throws NumericError with the epoch index if the
// loss becomes non-finite.
void train_network(Model& model, const LabeledData& data, const TrainConfig& config,
                   const Tensor* soft_targets = nullptr);

// Trains a teacher on the full training set T, optionally refines it toward a
// stationary point of the running-mode loss, and records TrainMeta: final
// mean loss, training accuracy and ||grad L_T|| over a full pass.
TeacherModel train_teacher(TeacherModel model, const LabeledData& train, const TrainConfig& config);

// Mean cross-entropy over `data` in running-statistics mode, evaluated in
// chunks, with the gradient norm when `grad_norm` is non-null.
double dataset_loss(const Model& model, const LabeledData& data, const WeightDelta* delta = nullptr,
                    double* grad_norm = nullptr);

// Top-1 accuracy in running-statistics mode (ties to the lowest class index).
double accuracy(const Model& model, const LabeledData& data);

}  // namespace dwa
