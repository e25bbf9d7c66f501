// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "dwa/model.h"
#include "dwa/synthesis.h"
#include "dwa/training.h"

namespace dwa {

struct SoftLabelSet {
  Tensor probs;  // [N, classes], rows sum to 1
  double temperature = 1.0;

  void validate() const;
};

// softmax(logits / tau) of the teacher in running-statistics mode.
SoftLabelSet relabel(const TeacherModel& teacher, const Tensor& instances, double tau);

// Fresh model of `arch` (initialized from config.seed) trained on `data`.
// With soft labels the student minimizes soft cross-entropy against them at
// config.temperature; otherwise hard-label cross-entropy.
StudentModel train_student(const LabeledData& data, const SoftLabelSet* soft,
                           const ArchSpec& arch, const TrainConfig& config);

// Fraction of instances whose label ranks in the top k logits. Ties rank
// the lower class index first.
double evaluate_topk(const Model& model, const LabeledData& validation, std::size_t k);
double topk_accuracy(const Tensor& logits, std::span<const int> labels, std::size_t k);

// sum_i sum_j ||f_i - f_j||^2 over rows of an [n, D] feature matrix.
double feature_distance(const Tensor& features);
// The same over the teacher features (last feature-extractor layer,
// post-activation, running-statistics mode) of class c's instances.
double class_feature_distance(const LabeledData& data, const TeacherModel& teacher, int c);

struct DiversityReport {
  std::vector<std::string> variants;
  std::size_t num_classes = 0;
  // [variant][class]
  std::vector<std::vector<double>> distance;
  // distance / max over variants for that class; 0 where every variant is 0.
  std::vector<std::vector<double>> normalized;
  std::vector<double> latent_variance;  // per variant
  std::string feature_source;

  double mean_normalized(std::size_t variant) const;
};

DiversityReport diversity_report(const std::vector<std::pair<std::string, LabeledData>>& variants,
                                 const TeacherModel& teacher);

}  // namespace dwa
