// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#include "dwa/eval_metrics.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "dwa/errors.h"
#include "dwa/rng.h"

namespace dwa {
namespace {

// Teacher features of the rows of `data` labelled c, as [n, D].
Tensor class_features(const LabeledData& data, const TeacherModel& teacher, int c) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.labels[i] == c) rows.push_back(i);
  }
  if (rows.empty()) {
    throw InvalidArgument("class_feature_distance: class " + std::to_string(c) +
                          " has no instances");
  }
  const Tensor inputs = data.inputs.gather_rows(rows);
  const Tensor f = forward(teacher, inputs, nullptr, BnMode::kRunning).features;
  return f.reshaped({rows.size(), f.size() / rows.size()});
}

}  // namespace

void SoftLabelSet::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw InvalidArgument("soft labels: temperature must be positive");
  }
  if (probs.rank() != 2) throw ShapeError("soft labels", "expected [N, classes]");
  const std::size_t classes = probs.dim(1);
  std::span<const double> p = probs.data();
  for (std::size_t i = 0; i < probs.dim(0); ++i) {
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      const double v = p[i * classes + c];
      if (!(v >= 0.0)) throw InvalidArgument("soft labels: negative probability");
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw InvalidArgument("soft labels: row " + std::to_string(i) + " does not sum to 1");
    }
  }
}

SoftLabelSet relabel(const TeacherModel& teacher, const Tensor& instances, double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw InvalidArgument("relabel: temperature must be positive and finite");
  }
  const Tensor logits = forward(teacher, instances, nullptr, BnMode::kRunning).logits;
  const std::size_t n = logits.dim(0), classes = logits.dim(1);
  std::vector<double> probs(n * classes);
  std::span<const double> z = logits.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = z.data() + i * classes;
    double m = row[0] / tau;
    for (std::size_t c = 1; c < classes; ++c) m = std::max(m, row[c] / tau);
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      probs[i * classes + c] = std::exp(row[c] / tau - m);
      total += probs[i * classes + c];
    }
    for (std::size_t c = 0; c < classes; ++c) probs[i * classes + c] /= total;
  }
  return {Tensor({n, classes}, std::move(probs)), tau};
}

StudentModel train_student(const LabeledData& data, const SoftLabelSet* soft,
                           const ArchSpec& arch, const TrainConfig& config) {
  if (data.size() == 0) throw InvalidArgument("train_student: empty training set");
  data.validate(arch.num_classes());
  StudentModel student = build_model(arch, mix_seed(config.seed, 0x5747));
  student.meta.seed = config.seed;
  if (soft != nullptr) {
    soft->validate();
    if (soft->probs.dim(0) != data.size() || soft->probs.dim(1) != arch.num_classes()) {
      throw ShapeError("train_student", "soft labels are " + shape_string(soft->probs.shape()) +
                                            " for " + std::to_string(data.size()) +
                                            " instances");
    }
    train_network(student, data, config, &soft->probs);
  } else {
    train_network(student, data, config, nullptr);
  }
  student.meta.epochs = config.epochs;
  return student;
}

double topk_accuracy(const Tensor& logits, std::span<const int> labels, std::size_t k) {
  if (labels.empty()) throw InvalidArgument("evaluate_topk: empty validation set");
  if (k == 0) throw InvalidArgument("evaluate_topk: k must be positive");
  const std::size_t classes = logits.dim(1);
  std::span<const double> z = logits.data();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw InvalidArgument("evaluate_topk: label " + std::to_string(y) + " out of range");
    }
    const double* row = z.data() + i * classes;
    std::size_t rank = 0;
    for (std::size_t c = 0; c < classes; ++c) {
      if (row[c] > row[y] || (row[c] == row[y] && c < static_cast<std::size_t>(y))) ++rank;
    }
    if (rank < k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double evaluate_topk(const Model& model, const LabeledData& validation, std::size_t k) {
  if (validation.size() == 0) throw InvalidArgument("evaluate_topk: empty validation set");
  const Tensor logits = forward(model, validation.inputs, nullptr, BnMode::kRunning).logits;
  return topk_accuracy(logits, validation.labels, k);
}

double feature_distance(const Tensor& features) {
  if (features.rank() != 2) throw ShapeError("feature_distance", "expected [n, D] features");
  const std::size_t n = features.dim(0), d = features.dim(1);
  std::span<const double> f = features.data();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double sq = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = f[i * d + k] - f[j * d + k];
        sq += diff * diff;
      }
      total += sq;
    }
  }
  return total;
}

double class_feature_distance(const LabeledData& data, const TeacherModel& teacher, int c) {
  return feature_distance(class_features(data, teacher, c));
}

double DiversityReport::mean_normalized(std::size_t variant) const {
  const std::vector<double>& row = normalized.at(variant);
  double total = 0.0;
  for (double v : row) total += v;
  return row.empty() ? 0.0 : total / static_cast<double>(row.size());
}

DiversityReport diversity_report(const std::vector<std::pair<std::string, LabeledData>>& variants,
                                 const TeacherModel& teacher) {
  if (variants.empty()) throw InvalidArgument("diversity_report: no variants");
  const std::size_t classes = teacher.arch.num_classes();
  auto class_set = [&](const LabeledData& d) {
    std::vector<bool> present(classes, false);
    d.validate(classes);
    for (int y : d.labels) present[static_cast<std::size_t>(y)] = true;
    return present;
  };
  const std::vector<bool> reference = class_set(variants.front().second);
  DiversityReport r;
  r.num_classes = classes;
  r.feature_source = "layer " + std::to_string(teacher.arch.feature_split - 1) +
                     " output (post-activation), running-statistics BN";
  for (const auto& [name, data] : variants) {
    if (class_set(data) != reference) {
      throw InvalidArgument("diversity_report: variant '" + name + "' covers a different class set");
    }
    r.variants.push_back(name);
    std::vector<double> row(classes, 0.0);
    for (std::size_t c = 0; c < classes; ++c) {
      if (reference[c]) row[c] = class_feature_distance(data, teacher, static_cast<int>(c));
    }
    r.distance.push_back(std::move(row));
    r.latent_variance.push_back(latent_variance(data, teacher).overall);
  }
  r.normalized.assign(variants.size(), std::vector<double>(classes, 0.0));
  for (std::size_t c = 0; c < classes; ++c) {
    double top = 0.0;
    for (const auto& row : r.distance) top = std::max(top, row[c]);
    if (top == 0.0) continue;
    for (std::size_t v = 0; v < variants.size(); ++v) r.normalized[v][c] = r.distance[v][c] / top;
  }
  return r;
}

}  // namespace dwa
