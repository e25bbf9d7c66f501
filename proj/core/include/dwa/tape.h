// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dwa/tensor.h"

namespace dwa {

class Tape;

// Handle to a value recorded on a Tape. Only meaningful for the tape that
// produced it.
class Var {
 public:
  Var() = default;
  bool valid() const noexcept { return index_ != kInvalid; }
  std::size_t index() const noexcept { return index_; }

 private:
  friend class Tape;
  static constexpr std::size_t kInvalid = std::numeric_limits<std::size_t>::max();
  explicit Var(std::size_t index) : index_(index) {}
  std::size_t index_ = kInvalid;
};

// Arguments handed to a primitive's backward rule. `grad_inputs[i]` is null
// when input i does not need a gradient; otherwise the rule must accumulate
// (+=) into it.
struct BackwardArgs {
  std::span<const Tensor* const> inputs;
  const Tensor& output;
  const Tensor& grad_output;
  std::span<Tensor* const> grad_inputs;
};

// Ordered record of primitive applications for reverse-mode differentiation.
// Confined to the thread that builds it.
class Tape {
 public:
  using Forward = std::function<Tensor(std::span<const Tensor* const>)>;
  using Backward = std::function<void(const BackwardArgs&)>;

  // Differentiable input.
  Var leaf(Tensor value);
  // Input that never receives a gradient.
  Var constant(Tensor value);

  // Runs `forward` on the input values, stores the result and the rule used
  // to propagate gradients back to `inputs`.
  Var record(std::string_view op, std::vector<Var> inputs, Forward forward, Backward backward);

  const Tensor& value(Var v) const;
  double scalar(Var v) const { return value(v).item(); }
  bool requires_grad(Var v) const;
  const std::string& op_name(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }

  // Gradient of the scalar `output` with respect to each of `wrt` (zeros for
  // vars the output does not depend on).
  std::vector<Tensor> gradients(Var output, std::span<const Var> wrt) const;

  // Re-executes every recorded primitive from the stored leaf values and
  // returns the recomputed value of `output`.
  Tensor replay(Var output) const;

 private:
  struct Node {
    std::string op;
    std::vector<std::size_t> inputs;
    Tensor value;
    Forward forward;
    Backward backward;
    bool requires_grad = false;
    bool is_leaf = false;
  };

  const Node& node(Var v) const;

  std::vector<Node> nodes_;
};

}  // namespace dwa
