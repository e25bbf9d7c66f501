// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "dwa/bn_objective.h"
#include "dwa/errors.h"
#include "dwa/rng.h"
#include "test_util.h"

namespace dwa {
namespace {

BnStatSet one_layer(std::vector<double> mean, std::vector<double> var) {
  BnStatSet s;
  s.layers.push_back({std::move(mean), std::move(var)});
  return s;
}

BnStatSet random_stats(Rng& rng, std::size_t layers, std::size_t channels) {
  BnStatSet s;
  for (std::size_t l = 0; l < layers; ++l) {
    BnLayerStats ls;
    for (std::size_t c = 0; c < channels; ++c) {
      ls.mean.push_back(rng.normal());
      ls.var.push_back(std::abs(rng.normal()) + 0.1);
    }
    s.layers.push_back(ls);
  }
  return s;
}

double central_diff(const std::function<double(std::span<const double>)>& f,
                    std::vector<double> s, std::size_t i, double h = 1e-5) {
  const double x = s[i];
  s[i] = x + h;
  const double up = f(s);
  s[i] = x - h;
  const double down = f(s);
  return (up - down) / (2.0 * h);
}

double rel(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12});
}

std::vector<double> random_values(Rng& rng, std::size_t n) {
  std::vector<double> s(n);
  for (double& v : s) v = 2.0 * rng.normal() + 0.5;
  return s;
}

TEST(StatLosses, IdenticalStatsGiveZero) {
  Rng rng(1);
  const BnStatSet s = random_stats(rng, 2, 3);
  EXPECT_EQ(mean_loss(s, s), 0.0);
  EXPECT_EQ(var_loss(s, s), 0.0);
}

TEST(StatLosses, MeanLossIsEuclideanNormPerLayer) {
  EXPECT_DOUBLE_EQ(mean_loss(one_layer({3, 4}, {1, 1}), one_layer({0, 0}, {1, 1})), 5.0);
}

TEST(StatLosses, MeanLossAddsAcrossLayers) {
  BnStatSet a, b;
  a.layers = {{{1.0}, {1.0}}, {{0.0, 2.5}, {1.0, 1.0}}};
  b.layers = {{{0.0}, {1.0}}, {{0.0, 0.0}, {1.0, 1.0}}};
  EXPECT_DOUBLE_EQ(mean_loss(a, b), 3.5);
}

TEST(StatLosses, VarLossOneChannel) {
  EXPECT_DOUBLE_EQ(var_loss(one_layer({0}, {2}), one_layer({0}, {1})), 1.0);
}

TEST(StatLosses, VarLossIsHomogeneousInTheGap) {
  Rng rng(2);
  const BnStatSet target = random_stats(rng, 2, 4);
  BnStatSet base = target;
  for (auto& l : base.layers) {
    for (double& v : l.var) v += 0.3 * std::abs(rng.normal());
  }
  const double l1 = var_loss(base, target);
  for (double c : {0.0, 0.5, 2.0, 7.0}) {
    BnStatSet scaled = target;
    for (std::size_t l = 0; l < scaled.layers.size(); ++l) {
      for (std::size_t ch = 0; ch < scaled.layers[l].var.size(); ++ch) {
        scaled.layers[l].var[ch] += c * (base.layers[l].var[ch] - target.layers[l].var[ch]);
      }
    }
    EXPECT_NEAR(var_loss(scaled, target), c * l1, 1e-12 * (1.0 + c * l1)) << c;
  }
}

TEST(StatLosses, IncongruentLayoutsAreRejected) {
  const BnStatSet a = one_layer({0, 0}, {1, 1});
  const BnStatSet b = one_layer({0}, {1});
  EXPECT_THROW(mean_loss(a, b), InvalidArgument);
  EXPECT_THROW(var_loss(a, b), InvalidArgument);
  BnStatSet two = a;
  two.layers.push_back(a.layers[0]);
  EXPECT_THROW(mean_loss(a, two), InvalidArgument);
}

TEST(StatLosses, NonnegativeZeroIffEqualAndChannelPermutationInvariant) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const BnStatSet a = random_stats(rng, 2, 5);
    const BnStatSet b = random_stats(rng, 2, 5);
    const double lm = mean_loss(a, b), lv = var_loss(a, b);
    EXPECT_GT(lm, 0.0);
    EXPECT_GT(lv, 0.0);

    BnStatSet c = a;
    const std::size_t l = rng.index(2), ch = rng.index(5);
    c.layers[l].mean[ch] += 1e-3;
    EXPECT_GT(mean_loss(a, c), 0.0);
    EXPECT_EQ(var_loss(a, c), 0.0);

    std::vector<std::size_t> perm = {3, 0, 4, 1, 2};
    BnStatSet pa = a, pb = b;
    for (std::size_t layer = 0; layer < 2; ++layer) {
      for (std::size_t k = 0; k < 5; ++k) {
        pa.layers[layer].mean[k] = a.layers[layer].mean[perm[k]];
        pa.layers[layer].var[k] = a.layers[layer].var[perm[k]];
        pb.layers[layer].mean[k] = b.layers[layer].mean[perm[k]];
        pb.layers[layer].var[k] = b.layers[layer].var[perm[k]];
      }
    }
    EXPECT_NEAR(mean_loss(pa, pb), lm, 1e-12 * lm);
    EXPECT_NEAR(var_loss(pa, pb), lv, 1e-12 * lv);
  }
}

class Recovery : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    data_ = new Dataset(test::small_toy(4, 3, 200, 11));
    teacher_ = new TeacherModel(test::small_teacher(*data_, 8, 5));
  }
  static void TearDownTestSuite() {
    delete teacher_;
    delete data_;
  }
  static Dataset* data_;
  static TeacherModel* teacher_;
};
Dataset* Recovery::data_ = nullptr;
TeacherModel* Recovery::teacher_ = nullptr;

TEST_F(Recovery, ZeroCoefficientsLeaveCrossEntropy) {
  const LabeledData batch = test::random_batch(6, 3, 4, 21);
  const WeightDelta delta(test::random_tensor({teacher_->parameter_count()}, 4, 0.01).values());
  const RecoveryBreakdown r = recovery_loss(*teacher_, delta, batch, LossWeights{0.0, 0.0});
  EXPECT_EQ(r.total, r.task);
  EXPECT_EQ(r.mean_term, 0.0);
  EXPECT_EQ(r.var_term, 0.0);
  EXPECT_GT(r.mean_loss, 0.0);
}

TEST_F(Recovery, SourcesCoincideAtZeroDelta) {
  const LabeledData batch = test::random_batch(5, 3, 4, 22);
  const WeightDelta zero = WeightDelta::zeros(teacher_->parameter_count());
  const LossWeights w{0.3, 0.7};
  const RecoveryBreakdown single = recovery_loss(*teacher_, zero, batch, w, BnSource::kSinglePass);
  const RecoveryBreakdown literal =
      recovery_loss(*teacher_, zero, batch, w, BnSource::kLiteralTwoPass);
  EXPECT_EQ(single.total, literal.total);
  EXPECT_EQ(single.batch_stats, literal.batch_stats);
}

TEST_F(Recovery, SourcesDifferUnderNonzeroDelta) {
  const LabeledData batch = test::random_batch(5, 3, 4, 23);
  const WeightDelta delta(test::random_tensor({teacher_->parameter_count()}, 5, 0.1).values());
  const LossWeights w{0.3, 0.7};
  const RecoveryBreakdown single = recovery_loss(*teacher_, delta, batch, w, BnSource::kSinglePass);
  const RecoveryBreakdown literal =
      recovery_loss(*teacher_, delta, batch, w, BnSource::kLiteralTwoPass);
  EXPECT_EQ(single.task, literal.task);
  EXPECT_NE(single.mean_loss, literal.mean_loss);
}

TEST_F(Recovery, BreakdownSumsToTotal) {
  Rng rng(24);
  for (int trial = 0; trial < 20; ++trial) {
    const LabeledData batch = test::random_batch(4 + trial % 3, 3, 4, 100 + trial);
    const WeightDelta delta(
        test::random_tensor({teacher_->parameter_count()}, 200 + trial, 0.05).values());
    const LossWeights w{rng.uniform(), rng.uniform()};
    const RecoveryBreakdown r = recovery_loss(*teacher_, delta, batch, w);
    EXPECT_NEAR(r.task + r.mean_term + r.var_term, r.total, 1e-12);
    EXPECT_NEAR(r.mean_term, w.lambda_mean * r.mean_loss, 1e-12);
    EXPECT_NEAR(r.var_term, w.lambda_var * r.var_loss, 1e-12);
    EXPECT_NEAR(r.mean_loss, mean_loss(r.batch_stats, teacher_->running_stats), 1e-12);
    EXPECT_NEAR(r.var_loss, var_loss(r.batch_stats, teacher_->running_stats), 1e-12);
  }
}

TEST_F(Recovery, NegativeWeightsAreRejected) {
  const LabeledData batch = test::random_batch(4, 3, 4, 25);
  const WeightDelta zero = WeightDelta::zeros(teacher_->parameter_count());
  EXPECT_THROW(recovery_loss(*teacher_, zero, batch, LossWeights{-0.1, 0.0}), InvalidArgument);
  EXPECT_THROW(recovery_loss(*teacher_, zero, batch, LossWeights{0.0, NAN}), InvalidArgument);
}

TEST(ChannelAlgebra, MeanGradExample) {
  const std::vector<double> s = {0.0, 0.5, 1.0, 0.5};
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_DOUBLE_EQ(analytic_mean_grad(s, 0.0, i), 0.25);
  }
  const auto f = [](std::span<const double> v) { return squared_mean_gap(v, 0.0); };
  EXPECT_NEAR(central_diff(f, s, 2), 0.25, 1e-9);
}

TEST(ChannelAlgebra, MeanGradVanishesAtZeroGap) {
  const std::vector<double> s = {1.0, -2.0, 4.0};
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(analytic_mean_grad(s, 1.0, i), 0.0);
}

TEST(ChannelAlgebra, EmptyAndOutOfRangeAreRejected) {
  const std::vector<double> empty;
  EXPECT_THROW(analytic_mean_grad(empty, 0.0, 0), InvalidArgument);
  const std::vector<double> s = {1.0, 2.0};
  EXPECT_THROW(analytic_mean_grad(s, 0.0, 2), InvalidArgument);
  EXPECT_THROW(analytic_var_grad(s, 0.0, 5), InvalidArgument);
}

TEST(ChannelAlgebra, VarGradExample) {
  const std::vector<double> s = {0.0, 2.0};
  EXPECT_DOUBLE_EQ(channel_population_var(s), 1.0);
  EXPECT_DOUBLE_EQ(analytic_var_grad(s, 0.0, 0), -1.0);
  EXPECT_DOUBLE_EQ(exact_var_grad(s, 0.0, 0), -2.0);
  const auto f = [](std::span<const double> v) { return squared_var_gap(v, 0.0); };
  EXPECT_NEAR(central_diff(f, s, 0), -2.0, 1e-9);
}

TEST(ChannelAlgebra, VarGradVanishesAtMeanOrZeroGap) {
  const std::vector<double> s = {0.0, 1.0, 2.0};
  EXPECT_EQ(analytic_var_grad(s, 0.3, 1), 0.0);
  const double v = channel_population_var(s);
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(analytic_var_grad(s, v, i), 0.0);
}

TEST(ChannelAlgebra, GradientsAgainstFiniteDifferences) {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.index(9);
    const std::vector<double> s = random_values(rng, n);
    const double tm = rng.normal(), tv = std::abs(rng.normal()) * 3.0;
    const std::size_t i = rng.index(n);
    const auto fm = [tm](std::span<const double> v) { return squared_mean_gap(v, tm); };
    const auto fv = [tv](std::span<const double> v) { return squared_var_gap(v, tv); };
    const double fd_mean = central_diff(fm, s, i);
    const double fd_var = central_diff(fv, s, i);
    EXPECT_LE(rel(analytic_mean_grad(s, tm, i), fd_mean), 1e-6) << trial;
    EXPECT_LE(rel(exact_var_grad(s, tv, i), fd_var), 1e-6) << trial;
    // The closed form misses the other summands' dependence on mu(S).
    EXPECT_NEAR(analytic_var_grad(s, tv, i),
                exact_var_grad(s, tv, i) * (1.0 - 1.0 / static_cast<double>(n)),
                1e-12 * std::max(1.0, std::abs(fd_var)))
        << trial;
  }
}

TEST(Contradiction, BelowMeanWithPositiveRIsContradictory) {
  const double r2 = std::sqrt(2.0);
  const std::vector<double> s = {1.0 - r2, 1.0 + r2};
  const ContradictionReport rep = contradiction_diagnostic(s, 0.0, 1.0);
  EXPECT_NEAR(rep.mean_s, 1.0, 1e-15);
  EXPECT_NEAR(rep.var_s, 2.0, 1e-14);
  EXPECT_NEAR(rep.r, 1.0, 1e-14);
  EXPECT_TRUE(rep.entries[0].contradictory);
  EXPECT_FALSE(rep.entries[1].contradictory);
  EXPECT_EQ(rep.contradictory_count(), 1u);
}

TEST(Contradiction, ZeroRFlagsNothing) {
  const std::vector<double> s = {0.0, 1.0, 5.0};
  const double m = channel_mean(s), v = channel_population_var(s);
  for (const auto& [tm, tv] : {std::pair{m, 0.1}, std::pair{-3.0, v}}) {
    const ContradictionReport rep = contradiction_diagnostic(s, tm, tv);
    EXPECT_EQ(rep.r, 0.0);
    EXPECT_EQ(rep.contradictory_count(), 0u);
  }
}

TEST(Contradiction, DegenerateBatchIsRejected) {
  const std::vector<double> one = {1.0};
  EXPECT_THROW(contradiction_diagnostic(one, 0.0, 1.0), InvalidArgument);
}

TEST(Contradiction, ClosedFormIdentityAndFlagsOverRandomConfigurations) {
  Rng rng(41);
  std::size_t checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.index(15);
    const std::vector<double> s = random_values(rng, n);
    const double tm = rng.normal(), tv = std::abs(rng.normal()) * 3.0;
    const ContradictionReport rep = contradiction_diagnostic(s, tm, tv);
    ASSERT_EQ(rep.entries.size(), n);
    for (std::size_t i = 0; i < n; ++i) {
      const ContradictionEntry& e = rep.entries[i];
      const double product = analytic_mean_grad(s, tm, i) * analytic_var_grad(s, tv, i);
      EXPECT_EQ(e.product, product);
      EXPECT_LE(rel(product, e.closed_form), 1e-10) << trial << " " << i;
      if (std::abs(product) > 1e-12) {
        EXPECT_EQ(e.contradictory, e.closed_form < 0.0);
        ++checked;
      }
    }
  }
  EXPECT_GT(checked, 5000u);
}

TEST(Contradiction, ScanCoversEveryChannel) {
  const Dataset data = test::small_toy(4, 3, 200, 12);
  const TeacherModel teacher = test::small_teacher(data, 6, 3);
  const Tensor batch = test::random_tensor({5, 3}, 51);
  const auto scan = contradiction_scan(teacher, batch);
  std::size_t channels = 0;
  for (const auto& l : teacher.running_stats.layers) channels += l.mean.size();
  ASSERT_EQ(scan.size(), channels);
  const ForwardResult fr = forward(teacher, batch, nullptr, BnMode::kBatch);
  for (const ChannelContradiction& c : scan) {
    const BnLayerStats& run = teacher.running_stats.layers[c.layer];
    const std::vector<double> vals = channel_values(fr.bn_inputs[c.layer], c.channel);
    const ContradictionReport expect =
        contradiction_diagnostic(vals, run.mean[c.channel], run.var[c.channel]);
    EXPECT_EQ(c.report.contradictory_count(), expect.contradictory_count());
    EXPECT_EQ(c.report.entries.size(), 5u);
  }
}

TEST(Contradiction, ChannelValuesRejectsBadChannel) {
  const Tensor x = test::random_tensor({2, 3}, 1);
  EXPECT_EQ(channel_values(x, 2), (std::vector<double>{x[2], x[5]}));
  EXPECT_THROW(channel_values(x, 3), ShapeError);
}

}  // namespace
}  // namespace dwa
