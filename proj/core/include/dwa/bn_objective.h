// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0
//
// Batch-normalization statistics matching: the norm-form losses used for
// synthesis, the full recovery objective, and the per-channel squared-form
// gradient algebra behind the mean/variance contradiction diagnostic.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dwa/model.h"

namespace dwa {

// Coefficients of the mean-matching and (decoupled) variance-matching terms.
struct LossWeights {
  double lambda_mean = 0.01;
  double lambda_var = 0.11;

  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

// sum_l ||mu_l(S) - mu_l(T)||_2. Throws InvalidArgument on incongruent sets.
double mean_loss(const BnStatSet& batch_stats, const BnStatSet& running_stats);
// sum_l ||sigma^2_l(S) - sigma^2_l(T)||_2.
double var_loss(const BnStatSet& batch_stats, const BnStatSet& running_stats);

struct RecoveryBreakdown {
  double task = 0.0;       // cross-entropy at params + delta
  double mean_term = 0.0;  // lambda_mean * L_mean
  double var_term = 0.0;   // lambda_var * L_var
  double total = 0.0;
  double mean_loss = 0.0;  // unweighted
  double var_loss = 0.0;   // unweighted
  BnStatSet batch_stats;   // the statistics compared against the running ones
};

// CE(f_{theta + delta}, S) + lambda_mean L_mean + lambda_var L_var, the BN
// terms measured against the teacher's running statistics. With
// kLiteralTwoPass the BN statistics come from a second forward at the
// unperturbed parameters; with kSinglePass they come from the perturbed one.
RecoveryBreakdown recovery_loss(const TeacherModel& teacher, const WeightDelta& delta,
                                const LabeledData& batch, const LossWeights& weights,
                                BnSource bn_source = BnSource::kSinglePass,
                                BnMode bn_mode = BnMode::kBatch);

LossSpec recovery_spec(const LossWeights& weights, BnSource bn_source,
                       BnMode bn_mode = BnMode::kBatch);

// --- Per-channel squared-form algebra -------------------------------------
// For one channel with synthetic values S = {s_1..s_n} and target moments
// mu(T), sigma^2(T): L_mean = [mu(S) - mu(T)]^2, L_var = [sigma^2(S) -
// sigma^2(T)]^2, population variance.

double channel_mean(std::span<const double> s);
double channel_population_var(std::span<const double> s);
double squared_mean_gap(std::span<const double> s, double target_mean);
double squared_var_gap(std::span<const double> s, double target_var);

// dL_mean/ds_i = 2[mu(S) - mu(T)] / |S|. Same value for every i.
double analytic_mean_grad(std::span<const double> s, double target_mean, std::size_t i);

// 2[sigma^2(S) - sigma^2(T)] (1/|S|) 2(s_i - mu(S)) (1 - 1/|S|): the
// appendix's closed form, which differentiates only the i-th summand of
// sigma^2(S). The exact derivative is this value times |S| / (|S| - 1); use
// exact_var_grad for that.
double analytic_var_grad(std::span<const double> s, double target_var, std::size_t i);

// Exact derivative 2[sigma^2(S) - sigma^2(T)] (2/|S|)(s_i - mu(S)).
double exact_var_grad(std::span<const double> s, double target_var, std::size_t i);

struct ContradictionEntry {
  double deviation = 0.0;    // s_i - mu(S)
  double product = 0.0;      // analytic_mean_grad * analytic_var_grad
  double closed_form = 0.0;  // (2/|S|)^3 (|S| - 1) R (s_i - mu(S))
  bool contradictory = false;  // product < 0
};

struct ContradictionReport {
  double r = 0.0;  // [mu(S) - mu(T)] [sigma^2(S) - sigma^2(T)]
  double mean_s = 0.0;
  double var_s = 0.0;
  std::vector<ContradictionEntry> entries;

  std::size_t contradictory_count() const;
};

// Requires |S| >= 2.
ContradictionReport contradiction_diagnostic(std::span<const double> s, double target_mean,
                                             double target_var);

// Every value of channel `channel` in an [N, C, ...] tensor, instance-major.
std::vector<double> channel_values(const Tensor& x, std::size_t channel);

struct ChannelContradiction {
  std::size_t layer = 0;
  std::size_t channel = 0;
  ContradictionReport report;
};

// Runs the diagnostic on every BN channel of `teacher` for `batch` (batch
// statistics against the running statistics).
std::vector<ChannelContradiction> contradiction_scan(const TeacherModel& teacher,
                                                     const Tensor& batch);

}  // namespace dwa
