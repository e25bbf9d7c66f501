// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#include "dwa/pipeline.h"

#include <algorithm>

#include "dwa/eval_metrics.h"
#include "dwa/rng.h"
#include "dwa/training.h"

namespace dwa {

Dataset load_experiment_dataset(const ExperimentConfig& config) {
  return load_dataset(config.dataset);
}

ArchSpec experiment_arch(const ExperimentConfig& config, const Dataset& data) {
  return arch_preset(config.arch, data.train.instance_shape(), data.num_classes, config.width);
}

TeacherModel train_experiment_teacher(const ExperimentConfig& config, const Dataset& data) {
  Model init = build_model(experiment_arch(config, data), mix_seed(config.teacher.seed, 1));
  return train_teacher(std::move(init), data.train, config.teacher);
}

StudentScore evaluate_synthetic(const ExperimentConfig& config, const TeacherModel& teacher,
                                const SyntheticSet& set, const LabeledData& validation,
                                std::uint64_t seed, bool hard_labels) {
  TrainConfig train = config.student;
  train.seed = seed;
  StudentModel student;
  if (hard_labels) {
    student = train_student(set.labeled(), nullptr, teacher.arch, train);
  } else {
    SoftLabelSet soft = set.soft_labels
                            ? SoftLabelSet{*set.soft_labels, set.soft_temperature}
                            : relabel(teacher, set.instances, config.temperature);
    train.temperature = soft.temperature;
    student = train_student(set.labeled(), &soft, teacher.arch, train);
  }
  const std::size_t k = std::min<std::size_t>(5, teacher.arch.num_classes());
  return {evaluate_topk(student, validation, 1), evaluate_topk(student, validation, k)};
}

}  // namespace dwa
