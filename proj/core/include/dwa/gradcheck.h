// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <span>
#include <vector>

#include "dwa/tape.h"
#include "dwa/tensor.h"

namespace dwa {

// A scalar-valued composition of primitives over the given leaf variables.
using Program = std::function<Var(Tape&, std::span<const Var>)>;

struct GradientResult {
  double value = 0.0;
  std::vector<Tensor> gradients;  // one per leaf, same shapes
};

// Records `program` on a fresh tape with one leaf per entry of `leaves` and
// returns its value together with exact reverse-mode gradients.
// Throws ShapeError when the program's output is not a scalar.
GradientResult eval_with_gradients(const Program& program, std::span<const Tensor> leaves);

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate.
// Throws NumericError (step = coordinate index) on a non-finite evaluation.
Tensor finite_diff_gradient(const std::function<double(const Tensor&)>& fn, const Tensor& point,
                            double step);

// ||a - b|| / max(||a||, ||b||, floor). Shapes must match.
double relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-8);

}  // namespace dwa
