// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dwa/arch.h"
#include "dwa/tensor.h"

namespace dwa {

struct BnLayerStats {
  std::vector<double> mean;
  std::vector<double> var;

  bool operator==(const BnLayerStats&) const = default;
};

// Per-BN-layer, per-channel moments. Holds either the running statistics of a
// trained network or the batch statistics of one forward pass.
struct BnStatSet {
  std::vector<BnLayerStats> layers;

  // Throws InvalidArgument on negative or non-finite variances or ragged
  // mean/variance vectors.
  void validate() const;
  bool congruent_with(const BnStatSet& other) const;
  bool operator==(const BnStatSet&) const = default;
};

// Instances with integer class labels. Row i of `inputs` has label i.
struct LabeledData {
  Tensor inputs;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  Shape instance_shape() const;
  LabeledData subset(std::span<const std::size_t> rows) const;
  void validate(std::size_t num_classes) const;
};

// Perturbation of a parameter vector; same length and layout as the params
// of the model it is applied to.
class WeightDelta {
 public:
  WeightDelta() = default;
  explicit WeightDelta(std::vector<double> values) : values_(std::move(values)) {}
  static WeightDelta zeros(std::size_t n) { return WeightDelta(std::vector<double>(n, 0.0)); }

  std::size_t size() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }
  double norm() const { return l2_norm(values_); }
  bool is_zero() const;

  WeightDelta scaled(double factor) const;
  WeightDelta operator-() const { return scaled(-1.0); }
  WeightDelta& operator+=(const WeightDelta& other);

  bool operator==(const WeightDelta&) const = default;

 private:
  std::vector<double> values_;
};

struct TrainMeta {
  std::size_t epochs = 0;
  double final_loss = 0.0;
  double train_accuracy = 0.0;
  // ||grad L_T(theta)|| of the mean cross-entropy over the full training set,
  // BN in running-statistics mode.
  double grad_norm = 0.0;
  std::uint64_t seed = 0;

  bool operator==(const TrainMeta&) const = default;
};

// Network parameters plus BN running statistics. Teachers and students share
// this representation.
struct Model {
  ArchSpec arch;
  ParamLayout layout;
  std::vector<double> params;
  BnStatSet running_stats;
  TrainMeta meta;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;

  std::size_t parameter_count() const { return params.size(); }
  std::span<const double> view(const std::string& name) const;
  void validate() const;
  // FNV-1a over architecture, parameters and running statistics.
  std::uint64_t fingerprint() const;
};

using TeacherModel = Model;
using StudentModel = Model;

enum class BnMode {
  kBatch,    // normalize with the current batch's statistics
  kRunning,  // normalize with the stored running statistics
};

// Deterministic initialization: uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for
// weights and biases, BN scale 1 and shift 0, running stats (0, 1).
Model build_model(const ArchSpec& arch, std::uint64_t seed);

struct ForwardResult {
  Tensor logits;
  BnStatSet batch_stats;  // per-channel moments of each BN layer's input
  Tensor features;        // output of the feature extractor
  std::vector<Tensor> bn_inputs;  // each BN layer's input, [N, C, ...]
};

// Forward pass at params (+ delta). Running statistics are never modified.
ForwardResult forward(const Model& model, const Tensor& batch, const WeightDelta* delta = nullptr,
                      BnMode mode = BnMode::kBatch);
// Same, with an explicit parameter vector congruent to model.params.
ForwardResult forward_with_params(const Model& model, std::span<const double> params,
                                  const Tensor& batch, BnMode mode = BnMode::kBatch);

struct ParamGradient {
  double loss = 0.0;
  WeightDelta grad;
};

// Mean softmax cross-entropy over the batch at params + delta and its
// gradient with respect to the parameters.
ParamGradient grad_wrt_params(const Model& model, const WeightDelta* delta,
                              const LabeledData& batch, BnMode mode = BnMode::kBatch);

// Where the BN statistics compared against the running statistics come from.
enum class BnSource {
  kSinglePass,     // the perturbed forward that also produces the task loss
  kLiteralTwoPass  // a second forward at the unperturbed parameters
};

// task * CE(params + delta) + lambda_mean * L_mean + lambda_var * L_var, with
// L_mean = sum_l ||mu_l(S) - mu_l(T)||_2 and L_var the same for variances.
struct LossSpec {
  double task = 1.0;
  double lambda_mean = 0.0;
  double lambda_var = 0.0;
  BnSource bn_source = BnSource::kSinglePass;
  BnMode bn_mode = BnMode::kBatch;
};

struct ObjectiveTerms {
  double task = 0.0;  // unweighted cross-entropy
  double mean = 0.0;  // unweighted L_mean
  double var = 0.0;   // unweighted L_var
  double total = 0.0;
  BnStatSet batch_stats;
};

struct InputGradient {
  double loss = 0.0;
  Tensor grad;
  ObjectiveTerms terms;
};

InputGradient grad_wrt_inputs(const Model& model, const WeightDelta* delta,
                              const LabeledData& batch, const LossSpec& spec);

}  // namespace dwa
