// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#include "dwa/model.h"

#include <algorithm>
#include <cmath>

#include "dwa/errors.h"
#include "dwa/hash.h"
#include "dwa/ops.h"
#include "dwa/rng.h"
#include "network_graph.h"

namespace dwa {

void BnStatSet::validate() const {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const BnLayerStats& s = layers[l];
    if (s.mean.size() != s.var.size()) {
      throw InvalidArgument("BN stats layer " + std::to_string(l) + ": mean/variance length mismatch");
    }
    for (std::size_t c = 0; c < s.var.size(); ++c) {
      if (!std::isfinite(s.mean[c]) || !std::isfinite(s.var[c]) || s.var[c] < 0.0) {
        throw InvalidArgument("BN stats layer " + std::to_string(l) + " channel " +
                              std::to_string(c) + ": invalid moments");
      }
    }
  }
}

bool BnStatSet::congruent_with(const BnStatSet& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].mean.size() != other.layers[l].mean.size() ||
        layers[l].var.size() != other.layers[l].var.size()) {
      return false;
    }
  }
  return true;
}

Shape LabeledData::instance_shape() const {
  return Shape(inputs.shape().begin() + 1, inputs.shape().end());
}

LabeledData LabeledData::subset(std::span<const std::size_t> rows) const {
  LabeledData out;
  out.inputs = inputs.gather_rows(rows);
  out.labels.reserve(rows.size());
  for (std::size_t r : rows) out.labels.push_back(labels.at(r));
  return out;
}

void LabeledData::validate(std::size_t num_classes) const {
  if (labels.empty()) throw InvalidArgument("dataset is empty");
  if (inputs.rank() < 2 || inputs.dim(0) != labels.size()) {
    throw InvalidArgument("dataset: " + std::to_string(labels.size()) + " labels for inputs " +
                          shape_string(inputs.shape()));
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
      throw InvalidArgument("dataset: label " + std::to_string(labels[i]) + " at row " +
                            std::to_string(i) + " outside [0, " + std::to_string(num_classes) +
                            ")");
    }
  }
}

bool WeightDelta::is_zero() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0; });
}

WeightDelta WeightDelta::scaled(double factor) const {
  WeightDelta out = *this;
  for (double& v : out.values_) v *= factor;
  return out;
}

WeightDelta& WeightDelta::operator+=(const WeightDelta& other) {
  if (other.size() != size()) throw ShapeError("weight_delta", "length mismatch");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

std::span<const double> Model::view(const std::string& name) const {
  const ParamView& v = layout.find(name);
  return std::span<const double>(params).subspan(v.offset, v.size());
}

void Model::validate() const {
  arch.validate();
  if (params.size() != layout.total) {
    throw InvalidArgument("model: " + std::to_string(params.size()) + " parameters, layout needs " +
                          std::to_string(layout.total));
  }
  for (double p : params) {
    if (!std::isfinite(p)) throw InvalidArgument("model: non-finite parameter");
  }
  running_stats.validate();
  const std::vector<std::size_t> channels = arch.bn_channels();
  if (running_stats.layers.size() != channels.size()) {
    throw InvalidArgument("model: running stats for " +
                          std::to_string(running_stats.layers.size()) + " BN layers, arch has " +
                          std::to_string(channels.size()));
  }
  for (std::size_t l = 0; l < channels.size(); ++l) {
    if (running_stats.layers[l].mean.size() != channels[l]) {
      throw InvalidArgument("model: BN layer " + std::to_string(l) + " channel count mismatch");
    }
  }
}

std::uint64_t Model::fingerprint() const {
  Fnv1a h;
  h.text(arch.name).u64(params.size()).f64s(params);
  for (const BnLayerStats& s : running_stats.layers) h.f64s(s.mean).f64s(s.var);
  h.f64(bn_eps).f64(bn_momentum);
  return h.digest();
}

Model build_model(const ArchSpec& arch, std::uint64_t seed) {
  arch.validate();
  Model m;
  m.arch = arch;
  m.layout = param_layout(arch);
  m.params.assign(m.layout.total, 0.0);
  m.meta.seed = seed;
  Rng rng(seed);
  for (const ParamView& v : m.layout.views) {
    auto dst = std::span<double>(m.params).subspan(v.offset, v.size());
    const bool is_gamma = v.name.ends_with(".bn_gamma");
    const bool is_beta = v.name.ends_with(".bn_beta");
    if (is_gamma || is_beta) {
      std::fill(dst.begin(), dst.end(), is_gamma ? 1.0 : 0.0);
      continue;
    }
    // Bias fan-in is taken from the sibling weight.
    const std::string base = v.name.substr(0, v.name.find('.'));
    const Shape& ws = m.layout.find(base + ".weight").shape;
    const std::size_t fan_in = shape_size(ws) / ws[0];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& p : dst) p = rng.uniform(-bound, bound);
  }
  for (std::size_t c : arch.bn_channels()) {
    m.running_stats.layers.push_back({std::vector<double>(c, 0.0), std::vector<double>(c, 1.0)});
  }
  return m;
}

ForwardResult forward_with_params(const Model& model, std::span<const double> params,
                                  const Tensor& batch, BnMode mode) {
  detail::check_batch(model, batch, "forward");
  if (params.size() != model.params.size()) {
    throw ShapeError("forward", "parameter vector of length " + std::to_string(params.size()) +
                                    ", model has " + std::to_string(model.params.size()));
  }
  Tape tape;
  const Var p = tape.constant(Tensor::unchecked({params.size()}, {params.begin(), params.end()}));
  const Var x = tape.constant(batch);
  const detail::NetworkGraph net = detail::build_network(tape, model, p, x, mode);
  ForwardResult r;
  r.logits = tape.value(net.logits);
  r.features = tape.value(net.features);
  r.batch_stats = detail::read_stats(tape, net);
  for (const Var v : net.bn_inputs) r.bn_inputs.push_back(tape.value(v));
  return r;
}

ForwardResult forward(const Model& model, const Tensor& batch, const WeightDelta* delta,
                      BnMode mode) {
  if (!delta) return forward_with_params(model, model.params, batch, mode);
  return forward_with_params(model, detail::effective_params(model, delta, "forward"), batch, mode);
}

ParamGradient grad_wrt_params(const Model& model, const WeightDelta* delta,
                              const LabeledData& batch, BnMode mode) {
  detail::check_batch(model, batch.inputs, "grad_wrt_params");
  batch.validate(model.arch.num_classes());
  Tape tape;
  std::vector<double> p = detail::effective_params(model, delta, "grad_wrt_params");
  const std::size_t count = p.size();
  const Var pv = tape.leaf(Tensor::unchecked({count}, std::move(p)));
  const Var x = tape.constant(batch.inputs);
  const detail::NetworkGraph net = detail::build_network(tape, model, pv, x, mode);
  const Var loss = ops::softmax_cross_entropy(tape, net.logits, batch.labels);
  const Var wrt[] = {pv};
  std::vector<Tensor> grads = tape.gradients(loss, wrt);
  return {tape.scalar(loss), WeightDelta(grads[0].values())};
}

InputGradient grad_wrt_inputs(const Model& model, const WeightDelta* delta,
                              const LabeledData& batch, const LossSpec& spec) {
  detail::check_batch(model, batch.inputs, "grad_wrt_inputs");
  batch.validate(model.arch.num_classes());
  Tape tape;
  const Var perturbed = tape.constant(Tensor::unchecked(
      {model.params.size()}, detail::effective_params(model, delta, "grad_wrt_inputs")));
  const Var clean = spec.bn_source == BnSource::kLiteralTwoPass
                        ? tape.constant(Tensor::unchecked({model.params.size()}, model.params))
                        : perturbed;
  const Var x = tape.leaf(batch.inputs);
  const detail::ObjectiveGraph obj =
      detail::build_objective(tape, model, perturbed, clean, x, batch.labels, spec);
  const Var wrt[] = {x};
  InputGradient out;
  out.grad = std::move(tape.gradients(obj.total, wrt)[0]);
  out.loss = tape.scalar(obj.total);
  out.terms.task = tape.scalar(obj.task);
  out.terms.mean = tape.scalar(obj.mean);
  out.terms.var = tape.scalar(obj.var);
  out.terms.total = out.loss;
  out.terms.batch_stats = detail::read_stats(tape, obj.stats_source);
  return out;
}

}  // namespace dwa
