// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "dwa/bn_objective.h"
#include "dwa/config.h"
#include "dwa/errors.h"
#include "dwa/rng.h"
#include "dwa/synthesis.h"
#include "test_util.h"

namespace dwa {
namespace {

std::vector<int> all_classes(std::size_t n) {
  std::vector<int> c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = static_cast<int>(i);
  return c;
}

DistillConfig quick_config() {
  DistillConfig cfg;
  cfg.ipc = 3;
  cfg.iterations = 30;
  cfg.learning_rate = 0.1;
  cfg.seed = 17;
  return cfg;
}

SynthesisManifest without_timing(SynthesisManifest m) {
  m.run.timings.clear();
  m.run.created_at.clear();
  for (SlotRecord& r : m.slots) r.adjust_seconds = r.synth_seconds = 0.0;
  return m;
}

class Synthesis : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    data_ = new Dataset(test::small_toy(4, 3, 200, 5));
    teacher_ = new TeacherModel(test::small_teacher(*data_, 8, 15));
  }
  static void TearDownTestSuite() {
    delete teacher_;
    delete data_;
  }
  static Dataset* data_;
  static TeacherModel* teacher_;
};
Dataset* Synthesis::data_ = nullptr;
TeacherModel* Synthesis::teacher_ = nullptr;

TEST(InitBatch, OneInstancePerClass) {
  const Dataset d = test::small_toy(10, 3, 300, 1);
  const std::vector<int> classes = all_classes(10);
  const LabeledData b = init_batch(d.train, classes, 4);
  ASSERT_EQ(b.size(), 10u);
  EXPECT_EQ(b.labels, classes);
  EXPECT_EQ(b.inputs.dim(1), 3u);
}

TEST(InitBatch, SameSeedSameSelection) {
  const Dataset d = test::small_toy(10, 3, 300, 1);
  const std::vector<int> classes = all_classes(10);
  EXPECT_EQ(init_rows(d.train, classes, 8), init_rows(d.train, classes, 8));
  EXPECT_TRUE(bit_identical(init_batch(d.train, classes, 8).inputs,
                            init_batch(d.train, classes, 8).inputs));
}

TEST(InitBatch, SlotStreamsSelectDifferentInstances) {
  const Dataset d = test::small_toy(4, 3, 200, 2);
  const std::vector<int> classes = all_classes(4);
  int differ = 0;
  const int trials = 1000;
  for (int s = 0; s < trials; ++s) {
    differ += init_rows(d.train, classes, mix_seed(s, 0)) !=
              init_rows(d.train, classes, mix_seed(s, 1));
  }
  // With 50 instances per class the chance of a full collision is 50^-4.
  EXPECT_GE(differ, trials - 1);
}

TEST(InitBatch, MissingClassIsNamed) {
  const Dataset d = test::small_toy(4, 3, 200, 2);
  const std::vector<int> classes = {0, 7};
  try {
    init_batch(d.train, classes, 0);
    FAIL() << "expected InvalidArgument";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("class 7"), std::string::npos);
  }
}

TEST_F(Synthesis, ZeroIterationsIsIdentity) {
  const LabeledData init = init_batch(data_->train, all_classes(4), 3);
  DistillConfig cfg = quick_config();
  cfg.iterations = 0;
  const BatchResult r =
      synthesize_batch(*teacher_, WeightDelta::zeros(teacher_->parameter_count()), init, cfg);
  EXPECT_TRUE(bit_identical(r.batch.inputs, init.inputs));
  EXPECT_EQ(r.batch.labels, init.labels);
  EXPECT_TRUE(r.losses.empty());
}

TEST_F(Synthesis, RecoveryLossDecreasesInMostSeeds) {
  DistillConfig cfg;
  cfg.iterations = 200;
  cfg.learning_rate = 0.1;
  int decreased = 0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    const LabeledData init = init_batch(data_->train, all_classes(4), 300 + s);
    const WeightDelta delta = solve_adjustment(*teacher_, init, cfg.adjustment);
    const BatchResult r = synthesize_batch(*teacher_, delta, init, cfg);
    ASSERT_EQ(r.losses.size(), 201u);
    const RecoveryBreakdown check =
        recovery_loss(*teacher_, delta, r.batch, cfg.weights, cfg.bn_source, cfg.bn_mode);
    EXPECT_NEAR(check.total, r.losses.back(), 1e-12 * std::max(1.0, check.total));
    decreased += r.losses.back() < r.losses.front();
  }
  EXPECT_GE(decreased, 19);
}

TEST_F(Synthesis, PureTaskObjectiveDoesNotIncreaseCrossEntropy) {
  DistillConfig cfg = quick_config();
  cfg.weights = {0.0, 0.0};
  cfg.iterations = 100;
  const WeightDelta zero = WeightDelta::zeros(teacher_->parameter_count());
  for (int s = 0; s < 5; ++s) {
    const LabeledData init = init_batch(data_->train, all_classes(4), 40 + s);
    const BatchResult r = synthesize_batch(*teacher_, zero, init, cfg);
    EXPECT_LE(r.losses.back(), r.losses.front()) << s;
  }
}

TEST_F(Synthesis, DivergenceKeepsLastFiniteBatch) {
  DistillConfig cfg = quick_config();
  cfg.learning_rate = 1e306;
  const LabeledData init = init_batch(data_->train, all_classes(4), 9);
  try {
    synthesize_batch(*teacher_, WeightDelta::zeros(teacher_->parameter_count()), init, cfg);
    FAIL() << "expected SynthesisError";
  } catch (const SynthesisError& e) {
    EXPECT_GE(e.step(), 1u);
    EXPECT_TRUE(e.last_finite().inputs.all_finite());
    EXPECT_EQ(e.last_finite().labels, init.labels);
  }
}

TEST_F(Synthesis, CardinalityAndLabels) {
  const Dataset d = test::small_toy(10, 3, 300, 6);
  const TeacherModel t = test::small_teacher(d, 8, 3);
  DistillConfig cfg = quick_config();
  cfg.ipc = 2;
  cfg.iterations = 5;
  const SyntheticSet set = distill(t, d.train, cfg);
  ASSERT_EQ(set.size(), 20u);
  EXPECT_EQ(set.instances.dim(0), 20u);
  for (int c = 0; c < 10; ++c) EXPECT_EQ(std::count(set.labels.begin(), set.labels.end(), c), 2);
  EXPECT_TRUE(set.instances.all_finite());
  EXPECT_EQ(set.manifest.run.config_hash, config_hash(cfg));
  EXPECT_EQ(set.manifest.slots.size(), 2u);
}

TEST_F(Synthesis, LabelsMatchInitializationPerSlot) {
  const DistillConfig cfg = quick_config();
  const SyntheticSet set = distill(*teacher_, data_->train, cfg);
  for (std::size_t i = 0; i < cfg.ipc; ++i) {
    const LabeledData init = init_batch(data_->train, all_classes(4), mix_seed(cfg.seed, i));
    EXPECT_EQ(set.manifest.slots[i].seed, mix_seed(cfg.seed, i));
    const std::vector<int> slot(set.labels.begin() + 4 * i, set.labels.begin() + 4 * (i + 1));
    EXPECT_EQ(slot, init.labels);
  }
}

TEST_F(Synthesis, NoneMatchesZeroRhoBitForBit) {
  DistillConfig none = quick_config();
  none.mode = AdjustmentMode::kNone;
  DistillConfig dwa = quick_config();
  dwa.adjustment.rho = 0.0;
  const SyntheticSet a = distill(*teacher_, data_->train, none);
  const SyntheticSet b = distill(*teacher_, data_->train, dwa);
  EXPECT_TRUE(bit_identical(a.instances, b.instances));
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_NE(a.manifest.mode, b.manifest.mode);
}

TEST_F(Synthesis, ThreadCountDoesNotChangeTheResult) {
  DistillConfig cfg = quick_config();
  cfg.ipc = 5;
  for (AdjustmentMode mode : {AdjustmentMode::kDwa, AdjustmentMode::kRandom}) {
    cfg.mode = mode;
    cfg.threads = 1;
    const SyntheticSet one = distill(*teacher_, data_->train, cfg);
    cfg.threads = 3;
    const SyntheticSet three = distill(*teacher_, data_->train, cfg);
    cfg.threads = 1;
    const SyntheticSet again = distill(*teacher_, data_->train, cfg);
    EXPECT_TRUE(bit_identical(one.instances, three.instances)) << to_string(mode);
    EXPECT_TRUE(bit_identical(one.instances, again.instances)) << to_string(mode);
    EXPECT_EQ(without_timing(one.manifest), without_timing(three.manifest));
  }
}

TEST_F(Synthesis, RemovingASlotLeavesOthersUnchanged) {
  for (AdjustmentMode mode : {AdjustmentMode::kDwa, AdjustmentMode::kNone}) {
    DistillConfig cfg = quick_config();
    cfg.mode = mode;
    cfg.ipc = 3;
    const SyntheticSet full = distill(*teacher_, data_->train, cfg);
    cfg.ipc = 2;
    const SyntheticSet fewer = distill(*teacher_, data_->train, cfg);
    EXPECT_TRUE(bit_identical(fewer.instances, full.instances.rows(0, 8))) << to_string(mode);
  }
}

TEST_F(Synthesis, DirectedDeltasDifferAcrossSlots) {
  DistillConfig cfg = quick_config();
  cfg.ipc = 20;
  cfg.iterations = 1;
  const SyntheticSet set = distill(*teacher_, data_->train, cfg);
  std::set<double> norms;
  for (const SlotRecord& r : set.manifest.slots) norms.insert(r.delta_norm);
  EXPECT_EQ(norms.size(), 20u);
}

TEST_F(Synthesis, RandomModeRecordsNormMatchedSigma) {
  DistillConfig cfg = quick_config();
  cfg.mode = AdjustmentMode::kRandom;
  const SyntheticSet set = distill(*teacher_, data_->train, cfg);
  EXPECT_GT(set.manifest.random_sigma, 0.0);
  cfg.random_sigma = 0.02;
  EXPECT_EQ(distill(*teacher_, data_->train, cfg).manifest.random_sigma, 0.02);
}

TEST(LatentVariance, SingleInstanceClassHasZeroVariance) {
  const Tensor f({3, 2}, {1.0, 2.0, 3.0, -1.0, 0.5, 0.25});
  const std::vector<int> labels = {0, 1, 1};
  const LatentVariance v = feature_variance(f, labels, 3);
  EXPECT_EQ(v.per_class[0], 0.0);
  EXPECT_GT(v.per_class[1], 0.0);
  EXPECT_EQ(v.class_counts, (std::vector<std::size_t>{1, 2, 0}));
}

TEST(LatentVariance, DuplicatingTheSetChangesNothing) {
  const Tensor f = test::random_tensor({7, 5}, 3);
  const std::vector<int> labels = {0, 1, 2, 0, 1, 2, 0};
  std::vector<Tensor> parts = {f, f};
  std::vector<int> doubled = labels;
  doubled.insert(doubled.end(), labels.begin(), labels.end());
  const LatentVariance a = feature_variance(f, labels, 3);
  const LatentVariance b = feature_variance(Tensor::concat_rows(parts), doubled, 3);
  EXPECT_NEAR(a.overall, b.overall, 1e-14 * a.overall);
  for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(a.per_dim[j], b.per_dim[j], 1e-14 * a.per_dim[j]);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_NEAR(a.per_class[c], b.per_class[c], 1e-14 * a.per_class[c]);
  }
}

TEST(LatentVariance, TwoPointSetHasUnitVariance) {
  const Tensor f({2, 3}, {0.0, 0.0, 0.0, 2.0, 2.0, 2.0});
  const std::vector<int> labels = {0, 0};
  const LatentVariance v = feature_variance(f, labels, 1);
  EXPECT_EQ(v.per_dim, (std::vector<double>{1.0, 1.0, 1.0}));
  EXPECT_EQ(v.overall, 1.0);
  EXPECT_EQ(v.per_class[0], 1.0);
}

TEST(LatentVariance, IdenticalRowsHaveExactlyZeroVariance) {
  const Tensor f({3, 2}, {0.1, 0.7, 0.1, 0.7, 0.1, 0.7});
  const std::vector<int> labels = {0, 0, 0};
  EXPECT_EQ(feature_variance(f, labels, 1).overall, 0.0);
}

TEST_F(Synthesis, LatentVarianceUsesTeacherFeatures) {
  const LabeledData b = init_batch(data_->train, all_classes(4), 2);
  const ForwardResult fr = forward(*teacher_, b.inputs, nullptr, BnMode::kRunning);
  EXPECT_EQ(latent_variance(b, *teacher_).per_dim,
            feature_variance(fr.features, b.labels, 4).per_dim);
  EXPECT_THROW(latent_variance(LabeledData{}, *teacher_), InvalidArgument);
}

}  // namespace
}  // namespace dwa
