// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#include "dwa/gradcheck.h"

#include <algorithm>
#include <cmath>

#include "dwa/errors.h"

namespace dwa {

GradientResult eval_with_gradients(const Program& program, std::span<const Tensor> leaves) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(leaves.size());
  for (const Tensor& t : leaves) vars.push_back(tape.leaf(t));
  const Var out = program(tape, vars);
  if (tape.value(out).size() != 1) {
    throw ShapeError(tape.op_name(out), "program output has shape " +
                                            shape_string(tape.value(out).shape()) +
                                            ", expected a scalar");
  }
  GradientResult result;
  result.value = tape.scalar(out);
  result.gradients = tape.gradients(out, vars);
  return result;
}

Tensor finite_diff_gradient(const std::function<double(const Tensor&)>& fn, const Tensor& point,
                            double step) {
  if (!(step > 0.0)) throw InvalidArgument("finite_diff_gradient: step must be positive");
  Tensor grad = Tensor::zeros(point.shape());
  Tensor probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double x = point[i];
    probe[i] = x + step;
    const double up = fn(probe);
    probe[i] = x - step;
    const double down = fn(probe);
    probe[i] = x;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("finite_diff_gradient: non-finite function value at coordinate " +
                             std::to_string(i),
                         i);
    }
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

double relative_error(std::span<const double> a, std::span<const double> b, double floor) {
  if (a.size() != b.size()) throw ShapeError("relative_error", "length mismatch");
  double diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += (a[i] - b[i]) * (a[i] - b[i]);
  const double denom = std::max({l2_norm(a), l2_norm(b), floor});
  return std::sqrt(diff) / denom;
}

}  // namespace dwa
