// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#include "dwa/stats.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "dwa/errors.h"

namespace dwa {

double mean(std::span<const double> xs) {
  if (xs.empty()) throw InvalidArgument("mean: empty sample");
  double total = 0.0;
  for (double x : xs) total += x;
  return total / static_cast<double>(xs.size());
}

double median(std::span<const double> xs) {
  if (xs.empty()) throw InvalidArgument("median: empty sample");
  std::vector<double> v(xs.begin(), xs.end());
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size();
  return m % 2 == 1 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

PairedTest paired_t_greater(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidArgument("paired test: samples differ in length");
  if (a.size() < 2) throw InvalidArgument("paired test: needs at least 2 pairs");
  PairedTest r;
  r.n = a.size();
  std::vector<double> d(r.n);
  for (std::size_t i = 0; i < r.n; ++i) d[i] = a[i] - b[i];
  r.mean_diff = mean(d);
  double ss = 0.0;
  for (double x : d) ss += (x - r.mean_diff) * (x - r.mean_diff);
  r.sd_diff = std::sqrt(ss / static_cast<double>(r.n - 1));
  if (r.sd_diff == 0.0) {
    r.t = r.mean_diff > 0.0 ? INFINITY : (r.mean_diff < 0.0 ? -INFINITY : 0.0);
    r.p_value = r.mean_diff > 0.0 ? 0.0 : 1.0;
    return r;
  }
  r.t = r.mean_diff / (r.sd_diff / std::sqrt(static_cast<double>(r.n)));
  boost::math::students_t dist(static_cast<double>(r.n - 1));
  r.p_value = boost::math::cdf(boost::math::complement(dist, r.t));
  return r;
}

}  // namespace dwa
