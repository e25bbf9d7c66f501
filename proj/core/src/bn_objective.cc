// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#include "dwa/bn_objective.h"

#include <cmath>
#include <string>

#include "dwa/errors.h"
#include "network_graph.h"

namespace dwa {
namespace {

void require_congruent(const BnStatSet& a, const BnStatSet& b, const char* op) {
  if (!a.congruent_with(b)) {
    throw InvalidArgument(std::string(op) + ": BN statistic sets have different layouts");
  }
}

template <typename Member>
double layer_norm_sum(const BnStatSet& a, const BnStatSet& b, Member member) {
  double total = 0.0;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    const std::vector<double>& x = a.layers[l].*member;
    const std::vector<double>& y = b.layers[l].*member;
    double sq = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) sq += (x[c] - y[c]) * (x[c] - y[c]);
    total += std::sqrt(sq);
  }
  return total;
}

void require_nonempty(std::span<const double> s, std::size_t i, const char* op) {
  if (s.empty()) throw InvalidArgument(std::string(op) + ": empty instance set");
  if (i >= s.size()) {
    throw InvalidArgument(std::string(op) + ": index " + std::to_string(i) + " outside set of " +
                          std::to_string(s.size()));
  }
}

}  // namespace

void LossWeights::validate() const {
  if (!std::isfinite(lambda_mean) || !std::isfinite(lambda_var) || lambda_mean < 0.0 ||
      lambda_var < 0.0) {
    throw InvalidArgument("loss weights must be finite and non-negative");
  }
}

double mean_loss(const BnStatSet& batch_stats, const BnStatSet& running_stats) {
  require_congruent(batch_stats, running_stats, "mean_loss");
  return layer_norm_sum(batch_stats, running_stats, &BnLayerStats::mean);
}

double var_loss(const BnStatSet& batch_stats, const BnStatSet& running_stats) {
  require_congruent(batch_stats, running_stats, "var_loss");
  return layer_norm_sum(batch_stats, running_stats, &BnLayerStats::var);
}

LossSpec recovery_spec(const LossWeights& weights, BnSource bn_source, BnMode bn_mode) {
  weights.validate();
  LossSpec spec;
  spec.task = 1.0;
  spec.lambda_mean = weights.lambda_mean;
  spec.lambda_var = weights.lambda_var;
  spec.bn_source = bn_source;
  spec.bn_mode = bn_mode;
  return spec;
}

RecoveryBreakdown recovery_loss(const TeacherModel& teacher, const WeightDelta& delta,
                                const LabeledData& batch, const LossWeights& weights,
                                BnSource bn_source, BnMode bn_mode) {
  if (batch.size() == 0) throw InvalidArgument("recovery_loss: empty batch");
  detail::check_batch(teacher, batch.inputs, "recovery_loss");
  batch.validate(teacher.arch.num_classes());
  const LossSpec spec = recovery_spec(weights, bn_source, bn_mode);

  Tape tape;
  const Var perturbed = tape.constant(Tensor::unchecked(
      {teacher.params.size()}, detail::effective_params(teacher, &delta, "recovery_loss")));
  const Var clean = tape.constant(Tensor::unchecked({teacher.params.size()}, teacher.params));
  const Var x = tape.constant(batch.inputs);
  const detail::ObjectiveGraph obj =
      detail::build_objective(tape, teacher, perturbed, clean, x, batch.labels, spec);

  RecoveryBreakdown r;
  r.task = tape.scalar(obj.task);
  r.mean_loss = tape.scalar(obj.mean);
  r.var_loss = tape.scalar(obj.var);
  r.mean_term = weights.lambda_mean * r.mean_loss;
  r.var_term = weights.lambda_var * r.var_loss;
  r.total = tape.scalar(obj.total);
  r.batch_stats = detail::read_stats(tape, obj.stats_source);
  return r;
}

double channel_mean(std::span<const double> s) {
  if (s.empty()) throw InvalidArgument("channel_mean: empty instance set");
  double total = 0.0;
  for (double v : s) total += v;
  return total / static_cast<double>(s.size());
}

double channel_population_var(std::span<const double> s) {
  const double mu = channel_mean(s);
  double total = 0.0;
  for (double v : s) total += (v - mu) * (v - mu);
  return total / static_cast<double>(s.size());
}

double squared_mean_gap(std::span<const double> s, double target_mean) {
  const double d = channel_mean(s) - target_mean;
  return d * d;
}

double squared_var_gap(std::span<const double> s, double target_var) {
  const double d = channel_population_var(s) - target_var;
  return d * d;
}

double analytic_mean_grad(std::span<const double> s, double target_mean, std::size_t i) {
  require_nonempty(s, i, "analytic_mean_grad");
  const double n = static_cast<double>(s.size());
  return 2.0 * (channel_mean(s) - target_mean) * (1.0 / n);
}

double analytic_var_grad(std::span<const double> s, double target_var, std::size_t i) {
  require_nonempty(s, i, "analytic_var_grad");
  const double n = static_cast<double>(s.size());
  const double mu = channel_mean(s);
  return 2.0 * (channel_population_var(s) - target_var) * (1.0 / n) * 2.0 * (s[i] - mu) *
         (1.0 - 1.0 / n);
}

double exact_var_grad(std::span<const double> s, double target_var, std::size_t i) {
  require_nonempty(s, i, "exact_var_grad");
  const double n = static_cast<double>(s.size());
  return 2.0 * (channel_population_var(s) - target_var) * (2.0 / n) * (s[i] - channel_mean(s));
}

std::size_t ContradictionReport::contradictory_count() const {
  std::size_t n = 0;
  for (const ContradictionEntry& e : entries) n += e.contradictory ? 1 : 0;
  return n;
}

ContradictionReport contradiction_diagnostic(std::span<const double> s, double target_mean,
                                             double target_var) {
  if (s.size() < 2) {
    throw InvalidArgument("contradiction_diagnostic: needs at least 2 instances, got " +
                          std::to_string(s.size()));
  }
  ContradictionReport rep;
  const double n = static_cast<double>(s.size());
  rep.mean_s = channel_mean(s);
  rep.var_s = channel_population_var(s);
  rep.r = (rep.mean_s - target_mean) * (rep.var_s - target_var);
  const double k = std::pow(2.0 / n, 3) * (n - 1.0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    ContradictionEntry e;
    e.deviation = s[i] - rep.mean_s;
    e.product = analytic_mean_grad(s, target_mean, i) * analytic_var_grad(s, target_var, i);
    e.closed_form = k * rep.r * e.deviation;
    e.contradictory = e.product < 0.0;
    rep.entries.push_back(e);
  }
  return rep;
}

std::vector<double> channel_values(const Tensor& x, std::size_t channel) {
  if (x.rank() < 2 || channel >= x.dim(1)) {
    throw ShapeError("channel_values", "channel " + std::to_string(channel) + " of " +
                                           shape_string(x.shape()));
  }
  const std::size_t n = x.dim(0);
  const std::size_t c = x.dim(1);
  const std::size_t inner = x.size() / (n * c);
  std::vector<double> out;
  out.reserve(n * inner);
  const auto v = x.values();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t base = (i * c + channel) * inner;
    out.insert(out.end(), v.begin() + base, v.begin() + base + inner);
  }
  return out;
}

std::vector<ChannelContradiction> contradiction_scan(const TeacherModel& teacher,
                                                     const Tensor& batch) {
  const ForwardResult fwd = forward(teacher, batch, nullptr, BnMode::kBatch);
  std::vector<ChannelContradiction> out;
  for (std::size_t l = 0; l < fwd.bn_inputs.size(); ++l) {
    const BnLayerStats& target = teacher.running_stats.layers.at(l);
    for (std::size_t ch = 0; ch < target.mean.size(); ++ch) {
      const std::vector<double> s = channel_values(fwd.bn_inputs[l], ch);
      out.push_back({l, ch, contradiction_diagnostic(s, target.mean[ch], target.var[ch])});
    }
  }
  return out;
}

}  // namespace dwa
