// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "dwa/arch.h"
#include "dwa/errors.h"
#include "dwa/eval_metrics.h"
#include "dwa/stats.h"
#include "dwa/synthesis.h"
#include "test_util.h"

namespace dwa {
namespace {

double row_entropy(const Tensor& p, std::size_t row) {
  const std::size_t c = p.dim(1);
  double h = 0.0;
  for (std::size_t j = 0; j < c; ++j) {
    const double v = p[row * c + j];
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

class Eval : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    DatasetSource src;
    src.toy.classes = 4;
    src.toy.dim = 3;
    src.toy.n = 400;
    src.toy.validation = 2000;
    src.toy.seed = 9;
    data_ = new Dataset(load_dataset(src));
    teacher_ = new TeacherModel(test::small_teacher(*data_, 8, 30));
  }
  static void TearDownTestSuite() {
    delete teacher_;
    delete data_;
  }
  static Dataset* data_;
  static TeacherModel* teacher_;
};
Dataset* Eval::data_ = nullptr;
TeacherModel* Eval::teacher_ = nullptr;

TEST_F(Eval, SoftLabelsAreDistributions) {
  for (double tau : {0.5, 1.0, 30.0}) {
    const SoftLabelSet s = relabel(*teacher_, data_->validation.inputs.rows(0, 50), tau);
    ASSERT_EQ(s.probs.dim(0), 50u);
    ASSERT_EQ(s.probs.dim(1), 4u);
    for (std::size_t i = 0; i < 50; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < 4; ++j) {
        EXPECT_GE(s.probs[i * 4 + j], 0.0);
        sum += s.probs[i * 4 + j];
      }
      EXPECT_NEAR(sum, 1.0, 1e-9);
    }
  }
  EXPECT_THROW(relabel(*teacher_, data_->validation.inputs, 0.0), InvalidArgument);
}

TEST_F(Eval, HugeTemperatureIsNearUniform) {
  const SoftLabelSet s = relabel(*teacher_, data_->validation.inputs.rows(0, 100), 1e6);
  for (double p : s.probs.data()) EXPECT_LE(std::abs(p - 0.25), 1e-4);
}

TEST_F(Eval, UnitTemperatureIsPlainSoftmax) {
  const Tensor x = data_->validation.inputs.rows(0, 20);
  const Tensor logits = forward(*teacher_, x, nullptr, BnMode::kRunning).logits;
  const SoftLabelSet s = relabel(*teacher_, x, 1.0);
  for (std::size_t i = 0; i < 20; ++i) {
    double z = 0.0;
    for (std::size_t j = 0; j < 4; ++j) z += std::exp(logits[i * 4 + j]);
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_NEAR(s.probs[i * 4 + j], std::exp(logits[i * 4 + j]) / z, 1e-15);
    }
  }
}

TEST_F(Eval, EntropyIsNondecreasingInTemperature) {
  const Tensor x = data_->validation.inputs.rows(0, 30);
  std::vector<double> prev(30, -1.0);
  for (double tau : {0.1, 0.5, 1.0, 2.0, 5.0, 20.0, 100.0, 1e4}) {
    const SoftLabelSet s = relabel(*teacher_, x, tau);
    for (std::size_t i = 0; i < 30; ++i) {
      const double h = row_entropy(s.probs, i);
      EXPECT_GE(h, prev[i] - 1e-12) << tau;
      prev[i] = h;
    }
  }
}

TEST_F(Eval, FullDataStudentMatchesTeacher) {
  TrainConfig tc;
  tc.epochs = 30;
  tc.batch_size = 32;
  tc.seed = 3;
  const StudentModel s = train_student(data_->train, nullptr, teacher_->arch, tc);
  const double teacher_acc = evaluate_topk(*teacher_, data_->validation, 1);
  EXPECT_NEAR(evaluate_topk(s, data_->validation, 1), teacher_acc, 0.01);
}

TEST_F(Eval, UntrainedStudentIsAtChance) {
  TrainConfig tc;
  tc.epochs = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    tc.seed = seed;
    const StudentModel s = train_student(data_->train, nullptr, teacher_->arch, tc);
    EXPECT_NEAR(evaluate_topk(s, data_->validation, 1), 0.25, 0.05) << seed;
  }
}

TEST_F(Eval, StudentTrainingIsDeterministicAndPure) {
  const LabeledData synth = init_batch(data_->train, std::vector<int>{0, 1, 2, 3}, 4);
  const LabeledData synth_copy = synth;
  const TeacherModel teacher_copy = *teacher_;
  const SoftLabelSet soft = relabel(*teacher_, synth.inputs, 30.0);
  TrainConfig tc;
  tc.epochs = 20;
  tc.batch_size = 4;
  tc.temperature = 30.0;
  tc.seed = 12;
  const StudentModel a = train_student(synth, &soft, teacher_->arch, tc);
  const StudentModel b = train_student(synth, &soft, teacher_->arch, tc);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.running_stats, b.running_stats);
  EXPECT_TRUE(bit_identical(synth.inputs, synth_copy.inputs));
  EXPECT_EQ(teacher_->params, teacher_copy.params);
  evaluate_topk(a, data_->validation, 2);
  EXPECT_EQ(teacher_->running_stats, teacher_copy.running_stats);
}

TEST(TopK, OneHotLogitsScorePerfectly) {
  const std::vector<int> labels = {2, 0, 1, 3, 3};
  std::vector<double> v(5 * 4, 0.0);
  for (std::size_t i = 0; i < 5; ++i) v[i * 4 + labels[i]] = 1.0;
  EXPECT_EQ(topk_accuracy(Tensor({5, 4}, v), labels, 1), 1.0);
}

TEST(TopK, AllClassesAlwaysScoresOne) {
  const Tensor logits = test::random_tensor({50, 6}, 8);
  std::vector<int> labels(50);
  for (std::size_t i = 0; i < 50; ++i) labels[i] = static_cast<int>((i * 7) % 6);
  EXPECT_EQ(topk_accuracy(logits, labels, 6), 1.0);
}

TEST(TopK, ConstantLogitsBreakTiesByClassIndex) {
  std::vector<int> labels(100);
  for (std::size_t i = 0; i < 100; ++i) labels[i] = static_cast<int>(i % 10);
  const Tensor logits = Tensor::filled({100, 10}, 0.5);
  EXPECT_DOUBLE_EQ(topk_accuracy(logits, labels, 1), 0.1);
  EXPECT_DOUBLE_EQ(topk_accuracy(logits, labels, 3), 0.3);
}

TEST(TopK, MonotoneInK) {
  const Tensor logits = test::random_tensor({200, 8}, 21);
  std::vector<int> labels(200);
  for (std::size_t i = 0; i < 200; ++i) labels[i] = static_cast<int>((i * 5 + 1) % 8);
  double prev = 0.0;
  for (std::size_t k = 1; k <= 8; ++k) {
    const double acc = topk_accuracy(logits, labels, k);
    EXPECT_GE(acc, prev);
    prev = acc;
  }
  EXPECT_THROW(topk_accuracy(logits, labels, 0), InvalidArgument);
  EXPECT_EQ(topk_accuracy(logits, labels, 9), 1.0);
}

TEST(FeatureDistance, TwoPointExample) {
  EXPECT_DOUBLE_EQ(feature_distance(Tensor({2, 2}, {0.0, 0.0, 1.0, 1.0})), 4.0);
}

TEST(FeatureDistance, IdenticalRowsGiveZero) {
  EXPECT_EQ(feature_distance(Tensor({3, 2}, {0.3, -1.0, 0.3, -1.0, 0.3, -1.0})), 0.0);
}

TEST(FeatureDistance, PermutationInvariantAndZeroOnlyWhenCoincident) {
  const Tensor f = test::random_tensor({6, 4}, 14);
  const std::vector<std::size_t> order = {4, 2, 5, 0, 1, 3};
  const double d = feature_distance(f);
  EXPECT_GT(d, 0.0);
  EXPECT_NEAR(feature_distance(f.gather_rows(order)), d, 1e-12 * d);
  Tensor g = Tensor::filled({4, 3}, 1.0);
  g[7] += 1e-9;
  EXPECT_GT(feature_distance(g), 0.0);
}

TEST_F(Eval, ClassFeatureDistanceOfDuplicatesIsZero) {
  const std::vector<std::size_t> rows = {0, 0, 0};
  const LabeledData dup = data_->train.subset(rows);
  EXPECT_EQ(class_feature_distance(dup, *teacher_, dup.labels[0]), 0.0);
  EXPECT_THROW(class_feature_distance(dup, *teacher_, (dup.labels[0] + 1) % 4), InvalidArgument);
}

TEST_F(Eval, DiversityAgainstItselfIsOne) {
  const LabeledData s = data_->train.subset(std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9,
                                                                     10, 11, 12, 13, 14, 15});
  const DiversityReport r = diversity_report({{"a", s}, {"b", s}}, *teacher_);
  ASSERT_EQ(r.normalized.size(), 2u);
  for (std::size_t c = 0; c < 4; ++c) {
    if (r.distance[0][c] == 0.0) continue;
    EXPECT_EQ(r.normalized[0][c], 1.0);
    EXPECT_EQ(r.normalized[1][c], 1.0);
  }
  EXPECT_EQ(r.latent_variance[0], r.latent_variance[1]);
  EXPECT_FALSE(r.feature_source.empty());
}

TEST_F(Eval, DuplicateCollapseHasZeroDistance) {
  std::vector<std::size_t> rows;
  const LabeledData one = init_batch(data_->train, std::vector<int>{0, 1, 2, 3}, 1);
  for (int rep = 0; rep < 3; ++rep) {
    for (std::size_t i = 0; i < 4; ++i) rows.push_back(i);
  }
  const LabeledData collapsed = one.subset(rows);
  const DiversityReport r =
      diversity_report({{"collapsed", collapsed}, {"varied", one}}, *teacher_);
  for (std::size_t c = 0; c < 4; ++c) {
    EXPECT_EQ(r.distance[0][c], 0.0);
    EXPECT_EQ(r.normalized[0][c], 0.0);
  }
  EXPECT_EQ(r.mean_normalized(0), 0.0);
}

TEST(PairedT, MatchesReferenceValues) {
  // scipy.stats.ttest_rel(a, b, alternative="greater")
  const std::vector<double> a = {0.61, 0.58, 0.64, 0.59, 0.62, 0.55};
  const std::vector<double> b = {0.57, 0.56, 0.60, 0.60, 0.58, 0.56};
  const PairedTest t = paired_t_greater(a, b);
  EXPECT_EQ(t.n, 6u);
  EXPECT_NEAR(t.t, 1.9999999999999982, 1e-9);
  EXPECT_NEAR(t.p_value, 0.050969739414929265, 1e-9);

  const std::vector<double> c = {1.0, 2.0, 3.0};
  const std::vector<double> d = {1.5, 2.1, 3.4};
  const PairedTest u = paired_t_greater(c, d);
  EXPECT_NEAR(u.t, -2.773500981126147, 1e-9);
  EXPECT_NEAR(u.p_value, 0.945435403187374, 1e-9);
}

TEST(PairedT, ConstantDifferences) {
  const std::vector<double> a = {2.0, 3.0, 4.0};
  const std::vector<double> b = {1.0, 2.0, 3.0};
  EXPECT_EQ(paired_t_greater(a, b).p_value, 0.0);
  EXPECT_EQ(paired_t_greater(b, a).p_value, 1.0);
  EXPECT_EQ(paired_t_greater(a, a).p_value, 1.0);
}

}  // namespace
}  // namespace dwa
