// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#include "dwa/tensor.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "dwa/errors.h"

namespace dwa {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (std::size_t d : shape_) {
    if (d == 0) throw InvalidArgument("tensor: zero-sized dimension in " + shape_string(shape_));
  }
  if (shape_size(shape_) != data_.size()) {
    throw ShapeError("tensor", "shape " + shape_string(shape_) + " needs " +
                                   std::to_string(shape_size(shape_)) + " elements, got " +
                                   std::to_string(data_.size()));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw InvalidArgument("tensor: non-finite element at flat index " + std::to_string(i));
    }
  }
}

Tensor Tensor::zeros(Shape shape) { return filled(std::move(shape), 0.0); }

Tensor Tensor::filled(Shape shape, double value) {
  Tensor t;
  t.data_.assign(shape_size(shape), value);
  t.shape_ = std::move(shape);
  return t;
}

Tensor Tensor::scalar(double value) {
  Tensor t;
  t.data_[0] = value;
  return t;
}

Tensor Tensor::vector(std::vector<double> values) {
  Shape shape{values.size()};
  return Tensor(std::move(shape), std::move(values));
}

Tensor Tensor::unchecked(Shape shape, std::vector<double> data) {
  if (shape_size(shape) != data.size()) {
    throw ShapeError("tensor", "shape " + shape_string(shape) + " for " +
                                   std::to_string(data.size()) + " elements");
  }
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::move(data);
  return t;
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw ShapeError("item", "tensor of shape " + shape_string(shape_) + " is not a scalar");
  }
  return data_[0];
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw ShapeError("reshape", shape_string(shape_) + " -> " + shape_string(shape));
  }
  return unchecked(std::move(shape), data_);
}

Tensor Tensor::rows(std::size_t begin, std::size_t end) const {
  if (rank() == 0 || begin > end || end > shape_[0]) {
    throw ShapeError("rows", "range [" + std::to_string(begin) + ", " + std::to_string(end) +
                                 ") outside " + shape_string(shape_));
  }
  const std::size_t stride = data_.size() / shape_[0];
  Shape shape = shape_;
  shape[0] = end - begin;
  std::vector<double> out(data_.begin() + static_cast<std::ptrdiff_t>(begin * stride),
                          data_.begin() + static_cast<std::ptrdiff_t>(end * stride));
  return unchecked(std::move(shape), std::move(out));
}

Tensor Tensor::gather_rows(std::span<const std::size_t> indices) const {
  if (rank() == 0) throw ShapeError("gather_rows", "scalar has no rows");
  const std::size_t stride = data_.size() / shape_[0];
  Shape shape = shape_;
  shape[0] = indices.size();
  std::vector<double> out(indices.size() * stride);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= shape_[0]) {
      throw ShapeError("gather_rows", "row " + std::to_string(indices[r]) + " out of range");
    }
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(indices[r] * stride), stride,
                out.begin() + static_cast<std::ptrdiff_t>(r * stride));
  }
  return unchecked(std::move(shape), std::move(out));
}

Tensor Tensor::concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_rows", "no inputs");
  Shape shape = parts.front().shape();
  if (shape.empty()) throw ShapeError("concat_rows", "scalars cannot be concatenated");
  std::size_t rows = 0;
  std::vector<double> out;
  for (const Tensor& p : parts) {
    if (p.rank() != shape.size() ||
        !std::equal(p.shape().begin() + 1, p.shape().end(), shape.begin() + 1)) {
      throw ShapeError("concat_rows", "mismatched trailing dims " + shape_string(p.shape()) +
                                          " vs " + shape_string(shape));
    }
    rows += p.shape()[0];
    out.insert(out.end(), p.values().begin(), p.values().end());
  }
  shape[0] = rows;
  return unchecked(std::move(shape), std::move(out));
}

bool bit_identical(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

double l2_norm(std::span<const double> values) {
  double s = 0.0;
  for (double v : values) s += v * v;
  return std::sqrt(s);
}

}  // namespace dwa
