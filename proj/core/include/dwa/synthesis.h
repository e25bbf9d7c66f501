// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0
//
// Per-slot synthesis: pick one real instance per class, adjust the teacher's
// weights in the direction that raises the loss on that batch, then optimize
// the batch's pixels against the statistics-matching objective.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dwa/bn_objective.h"
#include "dwa/dwa_solver.h"
#include "dwa/errors.h"
#include "dwa/manifest.h"
#include "dwa/model.h"

namespace dwa {

enum class AdjustmentMode { kDwa, kRandom, kNone };

std::string to_string(AdjustmentMode mode);
AdjustmentMode parse_adjustment_mode(const std::string& text);

struct DistillConfig {
  std::size_t ipc = 1;
  std::size_t iterations = 1000;
  double learning_rate = 0.25;  // cosine-decayed over `iterations`, restarted per slot
  double beta1 = 0.5;
  double beta2 = 0.9;
  LossWeights weights;
  AdjustmentConfig adjustment;
  AdjustmentMode mode = AdjustmentMode::kDwa;
  // Standard deviation for mode=random. 0 selects the norm-matched default:
  // sigma = median ||directed delta|| / sqrt(#params) over the run's slots.
  double random_sigma = 0.0;
  std::uint64_t seed = 0;
  BnSource bn_source = BnSource::kSinglePass;
  BnMode bn_mode = BnMode::kRunning;
  // Worker threads for the slot loop. Not part of the config hash: results do
  // not depend on it.
  std::size_t threads = 1;

  void validate() const;
  bool operator==(const DistillConfig&) const = default;
};

struct SlotRecord {
  std::uint64_t seed = 0;
  double delta_norm = 0.0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double adjust_seconds = 0.0;
  double synth_seconds = 0.0;

  bool operator==(const SlotRecord&) const = default;
};

struct SynthesisManifest {
  RunManifest run;
  std::size_t ipc = 0;
  std::size_t num_classes = 0;
  std::string mode;
  std::string gradient_mode;
  std::string bn_source;
  double random_sigma = 0.0;  // resolved value for mode=random, else 0
  std::vector<SlotRecord> slots;
  std::string config_json;  // canonical DistillConfig block hashed into run.config_hash

  bool operator==(const SynthesisManifest&) const = default;
};

struct SyntheticSet {
  Tensor instances;
  std::vector<int> labels;
  std::optional<Tensor> soft_labels;  // [N, classes]
  double soft_temperature = 0.0;
  SynthesisManifest manifest;

  std::size_t size() const { return labels.size(); }
  LabeledData labeled() const { return {instances, labels}; }
};

// One real instance per class from `data`, chosen uniformly by `seed`.
// Throws InvalidArgument naming the first class with no instance.
LabeledData init_batch(const LabeledData& data, std::span<const int> classes, std::uint64_t seed);
// The row indices init_batch selects, in class-list order.
std::vector<std::size_t> init_rows(const LabeledData& data, std::span<const int> classes,
                                   std::uint64_t seed);

struct BatchResult {
  LabeledData batch;
  // losses[t] is the objective before step t; losses.back() is the final value.
  std::vector<double> losses;
};

// Thrown when the objective becomes non-finite; keeps the last batch whose
// objective was finite.
class SynthesisError : public NumericError {
 public:
  SynthesisError(const std::string& what, std::size_t iteration, LabeledData last_finite)
      : NumericError(what, iteration), last_finite_(std::move(last_finite)) {}
  const LabeledData& last_finite() const noexcept { return last_finite_; }

 private:
  LabeledData last_finite_;
};

// `config.iterations` Adam steps descending the recovery objective with
// respect to the batch instances. Labels are never changed.
BatchResult synthesize_batch(const TeacherModel& teacher, const WeightDelta& delta,
                             const LabeledData& init, const DistillConfig& config);

// Runs every ipc slot (in parallel when config.threads > 1) and concatenates
// slot batches in slot order. Errors from a slot are rethrown with its index.
SyntheticSet distill(const TeacherModel& teacher, const LabeledData& train,
                     const DistillConfig& config);

struct LatentVariance {
  double overall = 0.0;                // mean over feature dims
  std::vector<double> per_dim;         // population variance per dim
  std::vector<double> per_class;       // mean over dims within each class
  std::vector<std::size_t> class_counts;
};

// Population variance of teacher features (running-statistics mode) across
// the instances of `data`.
LatentVariance latent_variance(const LabeledData& data, const TeacherModel& teacher);
LatentVariance latent_variance(const SyntheticSet& set, const TeacherModel& teacher);
// Same, from an explicit [N, D] feature matrix.
LatentVariance feature_variance(const Tensor& features, std::span<const int> labels,
                                std::size_t num_classes);

}  // namespace dwa
