// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "dwa/arch.h"
#include "dwa/dataset.h"
#include "dwa/model.h"
#include "dwa/rng.h"
#include "dwa/training.h"

namespace dwa::test {

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("dwa_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string path() const { return path_.string(); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline Tensor random_tensor(const Shape& shape, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = scale * rng.normal();
  return Tensor(shape, std::move(v));
}

inline LabeledData random_batch(std::size_t n, std::size_t dim, std::size_t classes,
                                std::uint64_t seed) {
  LabeledData b;
  b.inputs = random_tensor({n, dim}, seed);
  for (std::size_t i = 0; i < n; ++i) b.labels.push_back(static_cast<int>(i % classes));
  return b;
}

inline Dataset small_toy(std::size_t classes = 4, std::size_t dim = 3, std::size_t n = 200,
                         std::uint64_t seed = 0) {
  DatasetSource src;
  src.toy.classes = classes;
  src.toy.dim = dim;
  src.toy.n = n;
  src.toy.validation = 100;
  src.toy.seed = seed;
  return load_dataset(src);
}

inline TeacherModel small_teacher(const Dataset& data, std::size_t hidden = 8,
                                  std::size_t epochs = 15) {
  TrainConfig tc;
  tc.epochs = epochs;
  tc.batch_size = 32;
  tc.seed = 3;
  const ArchSpec arch =
      mlp_bn_2(data.train.instance_shape()[0], data.num_classes, hidden);
  return train_teacher(build_model(arch, 5), data.train, tc);
}

}  // namespace dwa::test
