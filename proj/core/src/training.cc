// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#include "dwa/training.h"

#include <cmath>
#include <numeric>

#include "dwa/errors.h"
#include "dwa/ops.h"
#include "dwa/rng.h"
#include "network_graph.h"

namespace dwa {

void train_network(Model& model, const LabeledData& data, const TrainConfig& config,
                   const Tensor* soft_targets) {
  detail::check_batch(model, data.inputs, "train");
  data.validate(model.arch.num_classes());
  if (config.batch_size == 0) throw InvalidArgument("train: batch size must be positive");
  if (!(config.learning_rate > 0.0)) throw InvalidArgument("train: learning rate must be positive");
  if (soft_targets &&
      soft_targets->shape() != Shape{data.size(), model.arch.num_classes()}) {
    throw ShapeError("train", "soft targets of shape " + shape_string(soft_targets->shape()) +
                                  " for " + std::to_string(data.size()) + " instances");
  }
  if (config.epochs == 0) return;

  const std::size_t n = data.size();
  const std::size_t num_batches = (n + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = config.epochs * num_batches;
  Adam opt(model.params.size(), config.adam);
  std::vector<std::size_t> order(n);
  std::size_t step = 0;
  const double momentum = model.bn_momentum;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(mix_seed(config.seed, epoch));
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < num_batches; ++b) {
      // Near-equal batch sizes so no batch degenerates to a single row.
      const std::size_t begin = b * n / num_batches;
      const std::size_t end = (b + 1) * n / num_batches;
      const std::span<const std::size_t> rows(order.data() + begin, end - begin);
      const LabeledData batch = data.subset(rows);

      Tape tape;
      const Var p = tape.leaf(Tensor::unchecked({model.params.size()}, model.params));
      const Var x = tape.constant(batch.inputs);
      const detail::NetworkGraph net = detail::build_network(tape, model, p, x, BnMode::kBatch);
      Var loss;
      if (soft_targets) {
        const Var t = tape.constant(soft_targets->gather_rows(rows));
        loss = ops::soft_cross_entropy(tape, net.logits, t, config.temperature);
      } else {
        loss = ops::softmax_cross_entropy(tape, net.logits, batch.labels);
      }
      const double value = tape.scalar(loss);
      if (!std::isfinite(value)) throw NumericError("training diverged: non-finite loss", epoch);
      const Var wrt[] = {p};
      const Tensor grad = std::move(tape.gradients(loss, wrt)[0]);
      if (!grad.all_finite()) throw NumericError("training diverged: non-finite gradient", epoch);

      const BnStatSet stats = detail::read_stats(tape, net);
      for (std::size_t l = 0; l < stats.layers.size(); ++l) {
        BnLayerStats& rs = model.running_stats.layers[l];
        for (std::size_t c = 0; c < rs.mean.size(); ++c) {
          rs.mean[c] = (1.0 - momentum) * rs.mean[c] + momentum * stats.layers[l].mean[c];
          rs.var[c] = (1.0 - momentum) * rs.var[c] + momentum * stats.layers[l].var[c];
        }
      }
      const double lr =
          config.cosine ? cosine_lr(config.learning_rate, step, total_steps) : config.learning_rate;
      opt.step(model.params, grad.data(), lr);
      ++step;
      epoch_loss += value * static_cast<double>(rows.size());
    }
    if (!std::isfinite(epoch_loss)) throw NumericError("training diverged", epoch);
  }
  for (double p : model.params) {
    if (!std::isfinite(p)) throw NumericError("training diverged: non-finite parameters", config.epochs);
  }
}

double dataset_loss(const Model& model, const LabeledData& data, const WeightDelta* delta,
                    double* grad_norm) {
  if (grad_norm) {
    const ParamGradient g = grad_wrt_params(model, delta, data, BnMode::kRunning);
    *grad_norm = g.grad.norm();
    return g.loss;
  }
  detail::check_batch(model, data.inputs, "dataset_loss");
  data.validate(model.arch.num_classes());
  Tape tape;
  const Var p = tape.constant(Tensor::unchecked(
      {model.params.size()}, detail::effective_params(model, delta, "dataset_loss")));
  const Var x = tape.constant(data.inputs);
  const detail::NetworkGraph net = detail::build_network(tape, model, p, x, BnMode::kRunning);
  return tape.scalar(ops::softmax_cross_entropy(tape, net.logits, data.labels));
}

double accuracy(const Model& model, const LabeledData& data) {
  if (data.size() == 0) throw InvalidArgument("accuracy: empty dataset");
  const Tensor logits = forward(model, data.inputs, nullptr, BnMode::kRunning).logits;
  const std::size_t k = logits.dim(1);
  std::size_t correct = 0;
  for (std::size_t r = 0; r < data.size(); ++r) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j) {
      if (logits[r * k + j] > logits[r * k + best]) best = j;
    }
    if (static_cast<int>(best) == data.labels[r]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

TeacherModel train_teacher(TeacherModel model, const LabeledData& train, const TrainConfig& config) {
  if (train.size() == 0) throw InvalidArgument("train_teacher: empty training set");
  train.validate(model.arch.num_classes());
  train_network(model, train, config);
  if (config.refine_steps > 0) {
    Adam opt(model.parameter_count(), AdamConfig{config.adam.beta1, config.adam.beta2,
                                                 config.adam.eps, 0.0});
    for (std::size_t r = 0; r < config.refine_steps; ++r) {
      const ParamGradient g = grad_wrt_params(model, nullptr, train, BnMode::kRunning);
      if (!std::isfinite(g.loss) || !std::isfinite(g.grad.norm())) {
        throw NumericError("teacher refinement diverged", r);
      }
      opt.step(model.params, g.grad.values(),
               cosine_lr(config.refine_learning_rate, r, config.refine_steps));
    }
  }
  model.meta.epochs = config.epochs;
  model.meta.seed = config.seed;
  double grad_norm = 0.0;
  model.meta.final_loss = dataset_loss(model, train, nullptr, &grad_norm);
  model.meta.grad_norm = grad_norm;
  model.meta.train_accuracy = accuracy(model, train);
  return model;
}

}  // namespace dwa
