// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "dwa/arch.h"
#include "dwa/dataset.h"
#include "dwa/dwa_solver.h"
#include "dwa/model.h"
#include "dwa/rng.h"
#include "dwa/synthesis.h"
#include "dwa/training.h"

namespace {

using namespace dwa;

struct Fixture {
  Dataset data;
  TeacherModel teacher;
  LabeledData init;
};

const Fixture& toy_fixture() {
  static const Fixture f = [] {
    Fixture x;
    DatasetSource src;
    src.toy.classes = 10;
    src.toy.dim = 8;
    src.toy.n = 1000;
    src.toy.modes = 3;
    src.toy.spread = 1.0;
    src.toy.mode_spread = 1.0;
    x.data = load_dataset(src);
    TrainConfig tc;
    tc.epochs = 10;
    tc.seed = 1;
    x.teacher = train_teacher(build_model(mlp_bn_2(8, 10, 32), 7), x.data.train, tc);
    std::vector<int> classes(10);
    for (int c = 0; c < 10; ++c) classes[c] = c;
    x.init = init_batch(x.data.train, classes, 3);
    return x;
  }();
  return f;
}

void BM_SynthesisStep(benchmark::State& state) {
  const Fixture& f = toy_fixture();
  DistillConfig cfg;
  cfg.iterations = static_cast<std::size_t>(state.range(0));
  const WeightDelta delta = WeightDelta::zeros(f.teacher.parameter_count());
  for (auto _ : state) {
    benchmark::DoNotOptimize(synthesize_batch(f.teacher, delta, f.init, cfg));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SynthesisStep)->Arg(1)->Arg(50);

void BM_AdjustmentSolve(benchmark::State& state) {
  const Fixture& f = toy_fixture();
  AdjustmentConfig cfg;
  cfg.steps_k = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_adjustment(f.teacher, f.init, cfg));
  }
}
BENCHMARK(BM_AdjustmentSolve)->Arg(1)->Arg(12);

void BM_ConvForward(benchmark::State& state) {
  const std::size_t side = static_cast<std::size_t>(state.range(0));
  const Model model = build_model(convnet_bn_3({3, side, side}, 10, 8), 1);
  Rng rng(2);
  std::vector<double> x(16 * 3 * side * side);
  for (double& v : x) v = rng.normal();
  const Tensor batch({16, 3, side, side}, x);
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward(model, batch, nullptr, BnMode::kBatch));
  }
}
BENCHMARK(BM_ConvForward)->Arg(8)->Arg(16);

}  // namespace

BENCHMARK_MAIN();
