// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0
//
// Records a Model's forward pass and the statistics-matching objective on a
// tape. Shared by the forward/gradient entry points, training and synthesis.

#pragma once

#include <span>
#include <vector>

#include "dwa/model.h"
#include "dwa/tape.h"

namespace dwa::detail {

struct NetworkGraph {
  Var logits;
  Var features;
  std::vector<Var> bn_means;  // batch statistics of each BN layer's input
  std::vector<Var> bn_vars;
  std::vector<Var> bn_inputs;
};

// `params` is a rank-1 var congruent to model.params; `input` is [N, ...].
NetworkGraph build_network(Tape& tape, const Model& model, Var params, Var input, BnMode mode);

struct ObjectiveGraph {
  Var total;
  Var task;
  Var mean;
  Var var;
  NetworkGraph stats_source;
};

// `perturbed` feeds the task term; `clean` feeds the BN terms when the spec
// asks for a literal two-pass evaluation.
ObjectiveGraph build_objective(Tape& tape, const Model& model, Var perturbed, Var clean,
                               Var input, std::span<const int> labels, const LossSpec& spec);

BnStatSet read_stats(const Tape& tape, const NetworkGraph& net);

void check_batch(const Model& model, const Tensor& batch, const char* op);
std::vector<double> effective_params(const Model& model, const WeightDelta* delta, const char* op);

}  // namespace dwa::detail
