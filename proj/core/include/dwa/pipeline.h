// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "dwa/arch.h"
#include "dwa/config.h"
#include "dwa/dataset.h"
#include "dwa/model.h"
#include "dwa/synthesis.h"

namespace dwa {

// End-to-end steps of an experiment described by an ExperimentConfig. The
// command-line tool and the acceptance suite share these so that a preset
// file means the same thing to both.

Dataset load_experiment_dataset(const ExperimentConfig& config);

ArchSpec experiment_arch(const ExperimentConfig& config, const Dataset& data);

// Initializes from mix_seed(config.teacher.seed, 1) and trains with
// config.teacher.
TeacherModel train_experiment_teacher(const ExperimentConfig& config, const Dataset& data);

struct StudentScore {
  double top1 = 0.0;
  double top5 = 0.0;  // equals top1 when there are fewer than 5 classes
};

// Trains a student on `set` with config.student (seed overridden) and scores
// it on `validation`. Uses the set's soft labels when present, otherwise
// relabels with the teacher at config.temperature; `hard_labels` skips soft
// targets entirely.
StudentScore evaluate_synthetic(const ExperimentConfig& config, const TeacherModel& teacher,
                                const SyntheticSet& set, const LabeledData& validation,
                                std::uint64_t seed, bool hard_labels = false);

}  // namespace dwa
