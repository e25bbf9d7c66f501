// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>

namespace dwa {

struct PairedTest {
  std::size_t n = 0;
  double mean_diff = 0.0;  // mean of a_i - b_i
  double sd_diff = 0.0;    // sample standard deviation of the differences
  double t = 0.0;
  double p_value = 1.0;    // one-sided, H1: mean(a - b) > 0
};

// Paired one-sided t-test. When every difference is identical the p-value is
// 0 for a positive difference and 1 otherwise.
PairedTest paired_t_greater(std::span<const double> a, std::span<const double> b);

double mean(std::span<const double> xs);
double median(std::span<const double> xs);

}  // namespace dwa
