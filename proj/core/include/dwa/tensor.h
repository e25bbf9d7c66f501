// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace dwa {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major array of doubles. A rank-0 tensor (empty shape) holds one
// scalar.
class Tensor {
 public:
  Tensor() : data_(1, 0.0) {}

  // Validating constructor: dims must be positive, the buffer must match the
  // shape and every element must be finite.
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape);
  static Tensor filled(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);
  // Skips the finiteness scan; used by primitives whose outputs may legally
  // overflow so the caller can detect it.
  static Tensor unchecked(Shape shape, std::vector<double> data);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  double item() const;
  bool all_finite() const noexcept;

  // Same shape, same buffer, different view.
  Tensor reshaped(Shape shape) const;

  // Rows [begin, end) along axis 0.
  Tensor rows(std::size_t begin, std::size_t end) const;
  Tensor gather_rows(std::span<const std::size_t> indices) const;
  static Tensor concat_rows(std::span<const Tensor> parts);

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Element-wise bitwise equality (distinguishes -0.0 from 0.0).
bool bit_identical(const Tensor& a, const Tensor& b);

double l2_norm(std::span<const double> values);

}  // namespace dwa
