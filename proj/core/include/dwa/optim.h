// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

namespace dwa {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled (AdamW) when > 0

  bool operator==(const AdamConfig&) const = default;
};

// Adam/AdamW over a flat parameter buffer.
class Adam {
 public:
  Adam(std::size_t size, AdamConfig config) : config_(config), m_(size, 0.0), v_(size, 0.0) {}

  void step(std::span<double> params, std::span<const double> grads, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * grads[i];
      v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * grads[i] * grads[i];
      const double mhat = m_[i] / c1;
      const double vhat = v_[i] / c2;
      if (config_.weight_decay > 0.0) params[i] -= lr * config_.weight_decay * params[i];
      params[i] -= lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }

  std::size_t steps() const { return t_; }

 private:
  AdamConfig config_;
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

// base * (1 + cos(pi * step / total)) / 2 for step in [0, total).
inline double cosine_lr(double base, std::size_t step, std::size_t total) {
  if (total == 0) return base;
  return 0.5 * base *
         (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(total)));
}

}  // namespace dwa
