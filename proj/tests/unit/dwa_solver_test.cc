// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "dwa/arch.h"
#include "dwa/dwa_solver.h"
#include "dwa/errors.h"
#include "dwa/rng.h"
#include "dwa/synthesis.h"
#include "test_util.h"

namespace dwa {
namespace {

class Solver : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    data_ = new Dataset(test::small_toy(4, 3, 200, 7));
    teacher_ = new TeacherModel(test::small_teacher(*data_, 8, 20));
  }
  static void TearDownTestSuite() {
    delete teacher_;
    delete data_;
  }

  static LabeledData batch(std::uint64_t seed) {
    const std::vector<int> classes = {0, 1, 2, 3};
    return init_batch(data_->train, classes, seed);
  }

  static Dataset* data_;
  static TeacherModel* teacher_;
};
Dataset* Solver::data_ = nullptr;
TeacherModel* Solver::teacher_ = nullptr;

TEST_F(Solver, ZeroRhoGivesExactlyZero) {
  AdjustmentConfig cfg;
  cfg.rho = 0.0;
  const WeightDelta d = solve_adjustment(*teacher_, batch(1), cfg);
  ASSERT_EQ(d.size(), teacher_->parameter_count());
  for (double v : d.values()) EXPECT_EQ(std::signbit(v), false) << v;
  EXPECT_TRUE(d.is_zero());
}

TEST_F(Solver, SingleStepIsScaledGradient) {
  AdjustmentConfig cfg;
  cfg.steps_k = 1;
  cfg.rho = 0.02;
  const LabeledData b = batch(2);
  const WeightDelta d = solve_adjustment(*teacher_, b, cfg);
  const ParamGradient g = grad_wrt_params(*teacher_, nullptr, b, cfg.bn_mode);
  ASSERT_EQ(d.size(), g.grad.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_DOUBLE_EQ(d.values()[i], 0.02 * g.grad.values()[i]);
  }
}

TEST_F(Solver, UnitNormalizedStepHasLengthRhoOverK) {
  AdjustmentConfig cfg;
  cfg.steps_k = 1;
  cfg.rho = 0.02;
  cfg.gradient_mode = GradientMode::kUnitNormalized;
  EXPECT_NEAR(solve_adjustment(*teacher_, batch(3), cfg).norm(), 0.02, 1e-15);
}

TEST_F(Solver, DefaultsRaiseTheBatchLoss) {
  AdjustmentConfig cfg;
  ASSERT_EQ(cfg.steps_k, 12u);
  ASSERT_EQ(cfg.rho, 15e-3);
  const LabeledData b = batch(4);
  AdjustmentTrace trace;
  const WeightDelta d = solve_adjustment(*teacher_, b, cfg, &trace);
  ASSERT_EQ(trace.losses.size(), 13u);
  ASSERT_EQ(trace.grad_norms.size(), 12u);
  EXPECT_GT(grad_wrt_params(*teacher_, &d, b, cfg.bn_mode).loss,
            grad_wrt_params(*teacher_, nullptr, b, cfg.bn_mode).loss);
  EXPECT_DOUBLE_EQ(trace.losses.back(), grad_wrt_params(*teacher_, &d, b, cfg.bn_mode).loss);
}

TEST_F(Solver, RawMagnitudeIsBoundedByLargestGradient) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    AdjustmentConfig cfg;
    cfg.rho = 0.05 * static_cast<double>(seed % 4 + 1);
    cfg.steps_k = 1 + seed % 12;
    AdjustmentTrace trace;
    const WeightDelta d = solve_adjustment(*teacher_, batch(seed), cfg, &trace);
    const double max_norm = *std::max_element(trace.grad_norms.begin(), trace.grad_norms.end());
    EXPECT_LE(d.norm(), cfg.rho * max_norm * (1.0 + 1e-12)) << seed;
  }
}

TEST_F(Solver, SmallRhoAscendsMonotonically) {
  int monotone = 0;
  const int runs = 40;
  for (int seed = 0; seed < runs; ++seed) {
    AdjustmentConfig cfg;
    cfg.rho = seed % 2 == 0 ? 1e-2 : 1e-3;
    AdjustmentTrace trace;
    solve_adjustment(*teacher_, batch(100 + seed), cfg, &trace);
    bool ok = true;
    for (std::size_t k = 1; k < trace.losses.size(); ++k) ok &= trace.losses[k] >= trace.losses[k - 1];
    monotone += ok;
  }
  EXPECT_GE(monotone, static_cast<int>(std::ceil(0.95 * runs)));
}

TEST_F(Solver, RepeatedSolvesAreByteIdentical) {
  AdjustmentConfig cfg;
  const LabeledData b = batch(5);
  const WeightDelta a = solve_adjustment(*teacher_, b, cfg);
  const WeightDelta c = solve_adjustment(*teacher_, b, cfg);
  ASSERT_EQ(a.size(), c.size());
  EXPECT_EQ(std::memcmp(a.values().data(), c.values().data(), a.size() * sizeof(double)), 0);
}

TEST_F(Solver, InvalidConfigIsRejected) {
  AdjustmentConfig cfg;
  cfg.rho = -1.0;
  EXPECT_THROW(solve_adjustment(*teacher_, batch(6), cfg), InvalidArgument);
  cfg.rho = 0.01;
  cfg.steps_k = 0;
  EXPECT_THROW(solve_adjustment(*teacher_, batch(6), cfg), InvalidArgument);
}

TEST_F(Solver, NonFiniteGradientReportsOneBasedStep) {
  TeacherModel broken = *teacher_;
  broken.params[0] = 1e300;
  broken.params[1] = -1e300;
  AdjustmentConfig cfg;
  try {
    solve_adjustment(broken, batch(7), cfg);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_EQ(e.step(), 1u);
  }
}

TEST_F(Solver, RandomAdjustmentIsDeterministic) {
  const WeightDelta a = random_adjustment(*teacher_, 0.1, 9);
  const WeightDelta b = random_adjustment(*teacher_, 0.1, 9);
  const WeightDelta c = random_adjustment(*teacher_, 0.1, 10);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  EXPECT_THROW(random_adjustment(*teacher_, 0.0, 9), InvalidArgument);
}

TEST(RandomAdjustment, SampleMeanWithinFourStandardErrors) {
  Model big = build_model(mlp_bn_2(300, 10, 300), 0);
  ASSERT_GE(big.parameter_count(), 100000u);
  const double sigma = 0.3;
  const WeightDelta d = random_adjustment(big, sigma, 123);
  const double n = static_cast<double>(d.size());
  const double mean = std::accumulate(d.values().begin(), d.values().end(), 0.0) / n;
  EXPECT_LE(std::abs(mean), 4.0 * sigma / std::sqrt(n));
  double sq = 0.0;
  for (double v : d.values()) sq += (v - mean) * (v - mean);
  EXPECT_NEAR(std::sqrt(sq / n), sigma, 0.01 * sigma);
}

TEST(RandomAdjustment, ScalesLinearlyWithSigma) {
  Model m = build_model(mlp_bn_2(3, 4, 8), 0);
  const WeightDelta a = random_adjustment(m, 0.25, 77);
  const WeightDelta b = random_adjustment(m, 0.5, 77);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(b.values()[i], 2.0 * a.values()[i]);
}

TEST_F(Solver, ZeroDeltaChangesNothing) {
  const LabeledData b = batch(11);
  const LabeledData h = data_->validation;
  const DirectionReport r =
      verify_direction(*teacher_, WeightDelta::zeros(teacher_->parameter_count()), b, h);
  EXPECT_EQ(r.batch_change(), 0.0);
  EXPECT_EQ(r.holdout_change(), 0.0);
  EXPECT_TRUE(r.claim_holdout_flat);
}

TEST_F(Solver, OverlappingHoldoutIsRejected) {
  const LabeledData b = batch(12);
  const WeightDelta zero = WeightDelta::zeros(teacher_->parameter_count());
  EXPECT_THROW(verify_direction(*teacher_, zero, b, data_->train), InvalidArgument);
}

TEST_F(Solver, DirectedDeltaRaisesBatchLoss) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const DirectionTrial t = direction_trial(*teacher_, data_->train, AdjustmentConfig{}, seed);
    EXPECT_GT(t.directed.batch_change(), 0.0) << seed;
    EXPECT_TRUE(t.directed.claim_batch_increase);
    EXPECT_GT(t.delta_norm, 0.0);
    EXPECT_EQ(t.directed.batch_before, t.random.batch_before);
  }
}

TEST_F(Solver, PerturbedViewZeroDeltaIsBitIdentical) {
  const PerturbedView v = apply_delta(*teacher_, WeightDelta::zeros(teacher_->parameter_count()));
  ASSERT_EQ(v.params().size(), teacher_->params.size());
  EXPECT_EQ(std::memcmp(v.params().data(), teacher_->params.data(),
                        teacher_->params.size() * sizeof(double)),
            0);
  const Tensor x = data_->validation.inputs.rows(0, 5);
  EXPECT_TRUE(bit_identical(v.forward(x).logits, forward(*teacher_, x, nullptr, BnMode::kRunning).logits));
}

TEST_F(Solver, PerturbedViewNegationRoundTrips) {
  const WeightDelta d = solve_adjustment(*teacher_, batch(13), AdjustmentConfig{});
  TeacherModel moved = *teacher_;
  const PerturbedView v = apply_delta(*teacher_, d);
  moved.params.assign(v.params().begin(), v.params().end());
  const PerturbedView back = apply_delta(moved, -d);
  for (std::size_t i = 0; i < teacher_->params.size(); ++i) {
    const double orig = teacher_->params[i];
    const double mag = std::max(std::abs(orig), std::abs(moved.params[i]));
    const double ulp = std::nextafter(mag, INFINITY) - mag;
    EXPECT_LE(std::abs(back.params()[i] - orig), ulp) << i;
  }
}

TEST_F(Solver, PerturbedViewNeverMutatesTeacher) {
  const TeacherModel before = *teacher_;
  const PerturbedView v = apply_delta(*teacher_, random_adjustment(*teacher_, 0.3, 6));
  v.forward(data_->validation.inputs, BnMode::kBatch);
  v.forward(data_->validation.inputs, BnMode::kRunning);
  EXPECT_EQ(teacher_->running_stats, before.running_stats);
  EXPECT_EQ(teacher_->params, before.params);
  EXPECT_THROW(apply_delta(*teacher_, WeightDelta::zeros(3)), ShapeError);
}

}  // namespace
}  // namespace dwa
