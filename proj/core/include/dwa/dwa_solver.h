// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dwa/model.h"

namespace dwa {

enum class GradientMode {
  kRaw,            // delta += (rho / K) * grad
  kUnitNormalized  // delta += (rho / K) * grad / ||grad||
};

struct AdjustmentConfig {
  std::size_t steps_k = 12;
  double rho = 15e-3;
  GradientMode gradient_mode = GradientMode::kRaw;
  std::uint64_t seed = 0;
  // BN normalization used while differentiating the batch loss.
  BnMode bn_mode = BnMode::kRunning;

  void validate() const;
  bool operator==(const AdjustmentConfig&) const = default;
};

struct AdjustmentTrace {
  // losses[k] is L_B at theta + delta_k for k = 0..K.
  std::vector<double> losses;
  // grad_norms[k] is ||grad L_B(theta + delta_k)|| for k = 0..K-1.
  std::vector<double> grad_norms;
};

// K-step gradient ascent on the cross-entropy of `init_batch`:
// delta_k = delta_{k-1} + (rho / K) grad L_B(f_{theta + delta_{k-1}}).
// Throws NumericError carrying the step index on a non-finite gradient.
WeightDelta solve_adjustment(const TeacherModel& teacher, const LabeledData& init_batch,
                             const AdjustmentConfig& config, AdjustmentTrace* trace = nullptr);

// I.i.d. N(0, sigma^2) per coordinate. The underlying standard normals depend
// only on the seed, so the result scales linearly with sigma.
WeightDelta random_adjustment(const TeacherModel& teacher, double sigma, std::uint64_t seed);

struct DirectionOptions {
  BnMode bn_mode = BnMode::kRunning;
  // Claim 2 holds when the holdout loss rises by at most this fraction of the
  // batch-loss increase.
  double holdout_tolerance = 0.1;
};

struct DirectionReport {
  double batch_before = 0.0;
  double batch_after = 0.0;
  double holdout_before = 0.0;
  double holdout_after = 0.0;
  // ||grad L(theta)|| over B and the holdout together.
  double grad_norm = 0.0;
  bool claim_batch_increase = false;
  bool claim_holdout_flat = false;

  double batch_change() const { return batch_after - batch_before; }
  double holdout_change() const { return holdout_after - holdout_before; }
};

// Rejects a holdout that shares a (bit-identical) instance with `batch`.
DirectionReport verify_direction(const TeacherModel& teacher, const WeightDelta& delta,
                                 const LabeledData& batch, const LabeledData& holdout,
                                 const DirectionOptions& options = {});

struct DirectionTrial {
  DirectionReport directed;
  DirectionReport random;  // random direction rescaled to the directed norm
  double delta_norm = 0.0;
};

// One trial of the direction check: B holds one training instance per class
// (drawn with `seed`), the holdout is the rest of `train`. The random delta
// comes from mix_seed(seed, 2).
DirectionTrial direction_trial(const TeacherModel& teacher, const LabeledData& train,
                               const AdjustmentConfig& config, std::uint64_t seed,
                               const DirectionOptions& options = {});

// Read-only theta + delta. The teacher must outlive the view.
class PerturbedView {
 public:
  PerturbedView(const TeacherModel& teacher, const WeightDelta& delta);

  std::span<const double> params() const { return params_; }
  const TeacherModel& base() const { return *teacher_; }
  ForwardResult forward(const Tensor& batch, BnMode mode = BnMode::kRunning) const;

 private:
  const TeacherModel* teacher_;
  std::vector<double> params_;
};

PerturbedView apply_delta(const TeacherModel& teacher, const WeightDelta& delta);

}  // namespace dwa
