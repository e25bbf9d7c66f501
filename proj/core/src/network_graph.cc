// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#include "network_graph.h"

#include <string>

#include "dwa/errors.h"
#include "dwa/ops.h"

namespace dwa::detail {

void check_batch(const Model& model, const Tensor& batch, const char* op) {
  const Shape& want = model.arch.input_shape;
  if (batch.rank() != want.size() + 1 ||
      !std::equal(want.begin(), want.end(), batch.shape().begin() + 1)) {
    throw ShapeError(op, "batch of shape " + shape_string(batch.shape()) +
                             " does not match input shape " + shape_string(want));
  }
}

std::vector<double> effective_params(const Model& model, const WeightDelta* delta,
                                     const char* op) {
  std::vector<double> p = model.params;
  if (delta) {
    if (delta->size() != p.size()) {
      throw ShapeError(op, "weight delta of length " + std::to_string(delta->size()) +
                               " for " + std::to_string(p.size()) + " parameters");
    }
    const auto d = delta->values();
    for (std::size_t i = 0; i < p.size(); ++i) p[i] += d[i];
  }
  return p;
}

NetworkGraph build_network(Tape& tape, const Model& model, Var params, Var input, BnMode mode) {
  NetworkGraph g;
  const ArchSpec& arch = model.arch;
  auto param = [&](const std::string& name) {
    const ParamView& v = model.layout.find(name);
    return ops::slice(tape, params, v.offset, v.shape);
  };
  Var h = input;
  std::size_t bn_index = 0;
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const LayerSpec& l = arch.layers[i];
    const std::string tag = "l" + std::to_string(i);
    switch (l.kind) {
      case LayerKind::kDense:
        h = ops::affine(tape, h, param(tag + ".weight"), param(tag + ".bias"));
        break;
      case LayerKind::kConv:
        h = ops::conv2d(tape, h, param(tag + ".weight"), param(tag + ".bias"), l.padding);
        break;
      case LayerKind::kGlobalAvgPool:
        h = ops::global_avg_pool(tape, h);
        break;
      case LayerKind::kFlatten:
        h = ops::flatten(tape, h);
        break;
    }
    if (l.batch_norm && (l.kind == LayerKind::kDense || l.kind == LayerKind::kConv)) {
      const Var mean = ops::channel_mean(tape, h);
      const Var var = ops::channel_var(tape, h);
      g.bn_means.push_back(mean);
      g.bn_vars.push_back(var);
      g.bn_inputs.push_back(h);
      Var norm_mean = mean;
      Var norm_var = var;
      if (mode == BnMode::kRunning) {
        const BnLayerStats& rs = model.running_stats.layers.at(bn_index);
        norm_mean = tape.constant(Tensor::vector(rs.mean));
        norm_var = tape.constant(Tensor::vector(rs.var));
      }
      h = ops::batch_norm(tape, h, norm_mean, norm_var, param(tag + ".bn_gamma"),
                          param(tag + ".bn_beta"), model.bn_eps);
      ++bn_index;
    }
    if (l.relu) h = ops::relu(tape, h);
    if (i + 1 == arch.feature_split) g.features = h;
  }
  g.logits = h;
  return g;
}

ObjectiveGraph build_objective(Tape& tape, const Model& model, Var perturbed, Var clean,
                               Var input, std::span<const int> labels, const LossSpec& spec) {
  ObjectiveGraph o;
  const NetworkGraph task_net = build_network(tape, model, perturbed, input, spec.bn_mode);
  o.stats_source = spec.bn_source == BnSource::kLiteralTwoPass
                       ? build_network(tape, model, clean, input, spec.bn_mode)
                       : task_net;
  o.task = ops::softmax_cross_entropy(tape, task_net.logits, labels);

  const auto& running = model.running_stats.layers;
  Var mean_loss, var_loss;
  for (std::size_t l = 0; l < running.size(); ++l) {
    const Var mt = ops::norm(tape, ops::sub(tape, o.stats_source.bn_means[l],
                                            tape.constant(Tensor::vector(running[l].mean))));
    const Var vt = ops::norm(tape, ops::sub(tape, o.stats_source.bn_vars[l],
                                            tape.constant(Tensor::vector(running[l].var))));
    mean_loss = mean_loss.valid() ? ops::add(tape, mean_loss, mt) : mt;
    var_loss = var_loss.valid() ? ops::add(tape, var_loss, vt) : vt;
  }
  o.mean = mean_loss;
  o.var = var_loss;
  o.total = ops::add(tape,
                     ops::add(tape, ops::scale(tape, o.task, spec.task),
                              ops::scale(tape, o.mean, spec.lambda_mean)),
                     ops::scale(tape, o.var, spec.lambda_var));
  return o;
}

BnStatSet read_stats(const Tape& tape, const NetworkGraph& net) {
  BnStatSet s;
  for (std::size_t l = 0; l < net.bn_means.size(); ++l) {
    const auto m = tape.value(net.bn_means[l]).values();
    const auto v = tape.value(net.bn_vars[l]).values();
    s.layers.push_back({m, v});
  }
  return s;
}

}  // namespace dwa::detail
