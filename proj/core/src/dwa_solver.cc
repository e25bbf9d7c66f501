// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#include "dwa/dwa_solver.h"

#include <cmath>
#include <cstring>
#include <string>
#include <unordered_set>

#include "dwa/errors.h"
#include "dwa/hash.h"
#include "dwa/rng.h"
#include "dwa/synthesis.h"
#include "network_graph.h"

namespace dwa {
namespace {

double batch_loss(const TeacherModel& teacher, const WeightDelta* delta, const LabeledData& data,
                  BnMode mode) {
  const ForwardResult out = forward(teacher, data.inputs, delta, mode);
  const std::size_t classes = out.logits.dim(1);
  std::span<const double> z = out.logits.data();
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double* row = z.data() + i * classes;
    double m = row[0];
    for (std::size_t c = 1; c < classes; ++c) m = std::max(m, row[c]);
    double s = 0.0;
    for (std::size_t c = 0; c < classes; ++c) s += std::exp(row[c] - m);
    total += m + std::log(s) - row[data.labels[i]];
  }
  return total / static_cast<double>(data.size());
}

std::uint64_t row_hash(std::span<const double> row) {
  Fnv1a h;
  h.f64s(row);
  return h.digest();
}

}  // namespace

void AdjustmentConfig::validate() const {
  if (steps_k == 0) throw InvalidArgument("adjustment: K must be at least 1");
  if (!std::isfinite(rho) || rho < 0.0) {
    throw InvalidArgument("adjustment: rho must be finite and non-negative");
  }
}

WeightDelta solve_adjustment(const TeacherModel& teacher, const LabeledData& init_batch,
                             const AdjustmentConfig& config, AdjustmentTrace* trace) {
  config.validate();
  if (init_batch.size() == 0) throw InvalidArgument("solve_adjustment: empty batch");
  init_batch.validate(teacher.arch.num_classes());
  if (trace != nullptr) *trace = {};

  WeightDelta delta = WeightDelta::zeros(teacher.parameter_count());
  if (config.rho == 0.0 && trace == nullptr) return delta;

  const double step = config.rho / static_cast<double>(config.steps_k);
  for (std::size_t k = 0; k < config.steps_k; ++k) {
    const ParamGradient g = grad_wrt_params(teacher, &delta, init_batch, config.bn_mode);
    const double gnorm = g.grad.norm();
    if (!std::isfinite(g.loss) || !std::isfinite(gnorm)) {
      throw NumericError("solve_adjustment: non-finite gradient", k + 1);
    }
    if (trace != nullptr) {
      trace->losses.push_back(g.loss);
      trace->grad_norms.push_back(gnorm);
    }
    if (config.rho == 0.0) continue;
    double factor = step;
    if (config.gradient_mode == GradientMode::kUnitNormalized) {
      if (gnorm == 0.0) continue;
      factor = step / gnorm;
    }
    delta += g.grad.scaled(factor);
  }
  if (trace != nullptr) {
    trace->losses.push_back(batch_loss(teacher, &delta, init_batch, config.bn_mode));
  }
  return delta;
}

WeightDelta random_adjustment(const TeacherModel& teacher, double sigma, std::uint64_t seed) {
  if (!std::isfinite(sigma) || sigma <= 0.0) {
    throw InvalidArgument("random_adjustment: sigma must be positive and finite");
  }
  Rng rng(seed);
  std::vector<double> values(teacher.parameter_count());
  for (double& v : values) v = sigma * rng.normal();
  return WeightDelta(std::move(values));
}

DirectionReport verify_direction(const TeacherModel& teacher, const WeightDelta& delta,
                                 const LabeledData& batch, const LabeledData& holdout,
                                 const DirectionOptions& options) {
  if (batch.size() == 0 || holdout.size() == 0) {
    throw InvalidArgument("verify_direction: batch and holdout must be nonempty");
  }
  if (!std::isfinite(options.holdout_tolerance) || options.holdout_tolerance < 0.0) {
    throw InvalidArgument("verify_direction: tolerance must be finite and non-negative");
  }
  const std::size_t classes = teacher.arch.num_classes();
  batch.validate(classes);
  holdout.validate(classes);
  if (batch.instance_shape() != holdout.instance_shape()) {
    throw ShapeError("verify_direction", "batch and holdout instance shapes differ");
  }
  const std::size_t width = shape_size(batch.instance_shape());
  std::unordered_set<std::uint64_t> seen;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    seen.insert(row_hash(batch.inputs.data().subspan(i * width, width)));
  }
  for (std::size_t j = 0; j < holdout.size(); ++j) {
    std::span<const double> row = holdout.inputs.data().subspan(j * width, width);
    if (!seen.contains(row_hash(row))) continue;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (std::memcmp(row.data(), batch.inputs.data().data() + i * width,
                      width * sizeof(double)) == 0) {
        throw InvalidArgument("verify_direction: holdout instance " + std::to_string(j) +
                              " also appears in the batch (row " + std::to_string(i) + ")");
      }
    }
  }

  DirectionReport r;
  r.batch_before = batch_loss(teacher, nullptr, batch, options.bn_mode);
  r.batch_after = batch_loss(teacher, &delta, batch, options.bn_mode);
  r.holdout_before = batch_loss(teacher, nullptr, holdout, options.bn_mode);
  r.holdout_after = batch_loss(teacher, &delta, holdout, options.bn_mode);

  const Tensor both_inputs = Tensor::concat_rows(std::vector<Tensor>{batch.inputs, holdout.inputs});
  LabeledData both{both_inputs, batch.labels};
  both.labels.insert(both.labels.end(), holdout.labels.begin(), holdout.labels.end());
  r.grad_norm = grad_wrt_params(teacher, nullptr, both, options.bn_mode).grad.norm();

  const double db = r.batch_change();
  r.claim_batch_increase = delta.is_zero() || db > 0.0;
  r.claim_holdout_flat = r.holdout_change() <= options.holdout_tolerance * std::max(db, 0.0);
  return r;
}

PerturbedView::PerturbedView(const TeacherModel& teacher, const WeightDelta& delta)
    : teacher_(&teacher), params_(detail::effective_params(teacher, &delta, "apply_delta")) {}

ForwardResult PerturbedView::forward(const Tensor& batch, BnMode mode) const {
  return forward_with_params(*teacher_, params_, batch, mode);
}

PerturbedView apply_delta(const TeacherModel& teacher, const WeightDelta& delta) {
  return PerturbedView(teacher, delta);
}

DirectionTrial direction_trial(const TeacherModel& teacher, const LabeledData& train,
                               const AdjustmentConfig& config, std::uint64_t seed,
                               const DirectionOptions& options) {
  std::vector<int> classes(teacher.arch.num_classes());
  for (std::size_t c = 0; c < classes.size(); ++c) classes[c] = static_cast<int>(c);
  const std::vector<std::size_t> rows = init_rows(train, classes, seed);
  std::vector<bool> in_batch(train.size(), false);
  for (const std::size_t r : rows) in_batch[r] = true;
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (!in_batch[i]) rest.push_back(i);
  }
  if (rest.empty()) throw InvalidArgument("direction_trial: no holdout instances remain");
  const LabeledData batch = train.subset(rows);
  const LabeledData holdout = train.subset(rest);

  AdjustmentConfig cfg = config;
  cfg.seed = seed;
  DirectionTrial trial;
  const WeightDelta delta = solve_adjustment(teacher, batch, cfg);
  trial.delta_norm = delta.norm();
  trial.directed = verify_direction(teacher, delta, batch, holdout, options);

  WeightDelta noise = random_adjustment(teacher, 1.0, mix_seed(seed, 2));
  const double n = noise.norm();
  noise = n > 0.0 ? noise.scaled(trial.delta_norm / n) : WeightDelta::zeros(noise.size());
  trial.random = verify_direction(teacher, noise, batch, holdout, options);
  return trial;
}

}  // namespace dwa
