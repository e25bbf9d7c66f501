// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#include "dwa/tape.h"

#include <optional>

#include "dwa/errors.h"

namespace dwa {

Var Tape::leaf(Tensor value) {
  Node n;
  n.op = "leaf";
  n.value = std::move(value);
  n.requires_grad = true;
  n.is_leaf = true;
  nodes_.push_back(std::move(n));
  return Var(nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.op = "constant";
  n.value = std::move(value);
  n.is_leaf = true;
  nodes_.push_back(std::move(n));
  return Var(nodes_.size() - 1);
}

Var Tape::record(std::string_view op, std::vector<Var> inputs, Forward forward,
                 Backward backward) {
  Node n;
  n.op = std::string(op);
  std::vector<const Tensor*> in;
  in.reserve(inputs.size());
  for (Var v : inputs) {
    const Node& src = node(v);
    n.inputs.push_back(v.index());
    n.requires_grad = n.requires_grad || src.requires_grad;
    in.push_back(&src.value);
  }
  n.value = forward(in);
  n.forward = std::move(forward);
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(nodes_.size() - 1);
}

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || v.index() >= nodes_.size()) {
    throw InvalidArgument("tape: variable does not belong to this tape");
  }
  return nodes_[v.index()];
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

const std::string& Tape::op_name(Var v) const { return node(v).op; }

std::vector<Tensor> Tape::gradients(Var output, std::span<const Var> wrt) const {
  const Node& out = node(output);
  if (out.value.size() != 1) {
    throw ShapeError(out.op, "gradient requested for non-scalar output of shape " +
                                 shape_string(out.value.shape()));
  }
  const std::size_t last = output.index();
  std::vector<std::optional<Tensor>> grads(last + 1);
  grads[last] = Tensor::filled(out.value.shape(), 1.0);

  std::vector<const Tensor*> in;
  std::vector<Tensor*> gin;
  for (std::size_t i = last + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    if (n.is_leaf || !grads[i] || !n.requires_grad) continue;
    in.clear();
    gin.clear();
    for (std::size_t src : n.inputs) {
      in.push_back(&nodes_[src].value);
      if (nodes_[src].requires_grad) {
        if (!grads[src]) grads[src] = Tensor::zeros(nodes_[src].value.shape());
        gin.push_back(&*grads[src]);
      } else {
        gin.push_back(nullptr);
      }
    }
    n.backward(BackwardArgs{in, n.value, *grads[i], gin});
  }

  std::vector<Tensor> result;
  result.reserve(wrt.size());
  for (Var v : wrt) {
    const Node& n = node(v);
    if (v.index() <= last && grads[v.index()]) {
      result.push_back(*grads[v.index()]);
    } else {
      result.push_back(Tensor::zeros(n.value.shape()));
    }
  }
  return result;
}

Tensor Tape::replay(Var output) const {
  node(output);
  std::vector<Tensor> values(output.index() + 1);
  std::vector<const Tensor*> in;
  for (std::size_t i = 0; i <= output.index(); ++i) {
    const Node& n = nodes_[i];
    if (n.is_leaf) {
      values[i] = n.value;
      continue;
    }
    in.clear();
    for (std::size_t src : n.inputs) in.push_back(&values[src]);
    values[i] = n.forward(in);
  }
  return values[output.index()];
}

}  // namespace dwa
