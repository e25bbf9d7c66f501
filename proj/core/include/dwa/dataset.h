// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dwa/model.h"

namespace dwa {

// Gaussian-mixture classification task. Each class owns `modes` sub-centers
// scattered around a class center; instances are a sub-center plus isotropic
// noise.
struct ToyGaussians {
  std::size_t classes = 10;
  std::size_t dim = 2;
  std::size_t n = 1000;          // training instances
  std::size_t validation = 500;  // validation instances
  std::uint64_t seed = 0;
  double spread = 3.0;       // std of class centers
  double mode_spread = 0.0;  // std of sub-centers around their class center
  double noise = 1.0;        // std of instance noise
  std::size_t modes = 1;

  void validate() const;
  bool operator==(const ToyGaussians&) const = default;
};

// Per-channel affine normalization (x - mean) / stddev. For rank-1 instances
// each feature is a channel; otherwise dimension 0 of the instance is.
struct Normalization {
  std::vector<double> mean;
  std::vector<double> stddev;

  bool empty() const { return mean.empty(); }
  bool operator==(const Normalization&) const = default;
};

struct Dataset {
  LabeledData train;
  LabeledData validation;
  std::size_t num_classes = 0;
  Normalization normalization;  // computed from `train` before it was normalized
};

enum class DatasetFormat { kToy, kIdx, kCsv };

struct DatasetSource {
  DatasetFormat format = DatasetFormat::kToy;
  ToyGaussians toy;
  // IDX: image and label files per split. CSV: train_images and
  // validation_images hold the CSV paths; the label files are unused.
  std::string train_images;
  std::string train_labels;
  std::string validation_images;
  std::string validation_labels;
  std::size_t num_classes = 0;  // 0 infers max label + 1
  bool normalize = true;
  bool operator==(const DatasetSource&) const = default;
};

LabeledData toy_split(const ToyGaussians& params, bool validation);
Dataset load_dataset(const DatasetSource& source);

// IDX ("MNIST") files. Rank-3 image files load as [N, 1, H, W]; rank-2 as
// [N, D]. Throws DataError with the byte offset of the first problem.
Tensor read_idx_images(const std::string& path);
std::vector<int> read_idx_labels(const std::string& path);
Tensor parse_idx_images(const std::string& bytes, const std::string& origin);
std::vector<int> parse_idx_labels(const std::string& bytes, const std::string& origin);

// CSV with header "label,x0,x1,...". Rows are instances; instance shape is
// [columns - 1]. Throws DataError with the 1-based line number.
LabeledData parse_csv_dataset(const std::string& text, const std::string& origin,
                              std::size_t num_classes = 0);
LabeledData read_csv_dataset(const std::string& path, std::size_t num_classes = 0);
std::string format_csv_dataset(const LabeledData& data);
void write_csv_dataset(const LabeledData& data, const std::string& path);

Normalization fit_normalization(const Tensor& inputs);
Tensor apply_normalization(const Tensor& inputs, const Normalization& norm);

}  // namespace dwa
