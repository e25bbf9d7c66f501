// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0
//
// Differentiable primitives recorded on a Tape. Every function validates its
// input shapes and throws ShapeError naming the primitive on mismatch.

#pragma once

#include <cstddef>
#include <span>

#include "dwa/tape.h"

namespace dwa::ops {

enum class Padding { kSame, kValid };

Var add(Tape& tape, Var a, Var b);
Var sub(Tape& tape, Var a, Var b);
Var mul(Tape& tape, Var a, Var b);
Var scale(Tape& tape, Var a, double factor);
Var add_scalar(Tape& tape, Var a, double offset);

// Sum of all elements, as a scalar.
Var sum(Tape& tape, Var a);
// sum((a - b)^2), as a scalar.
Var square_diff_sum(Tape& tape, Var a, Var b);
// Euclidean norm of all elements. The subgradient at 0 is 0.
Var norm(Tape& tape, Var a);

// x[N, in] * w[out, in]^T + b[out].
Var affine(Tape& tape, Var x, Var w, Var b);
// Stride-1 2-D convolution: x[N, C, H, W], w[O, C, k, k], b[O].
Var conv2d(Tape& tape, Var x, Var w, Var b, Padding padding);
// max(x, 0); derivative at 0 is 0.
Var relu(Tape& tape, Var x);
// [N, C, H, W] -> [N, C].
Var global_avg_pool(Tape& tape, Var x);
// [N, ...] -> [N, prod(...)].
Var flatten(Tape& tape, Var x);

// Per-channel batch mean / population variance over every axis except 1.
// Accepts [N, C] and [N, C, H, W].
Var channel_mean(Tape& tape, Var x);
Var channel_var(Tape& tape, Var x);

// gamma * (x - mean) / sqrt(var + eps) + beta, per channel. In batch mode the
// caller passes `mean`/`var` computed from `x` itself so that the gradient
// flows through the statistics; in inference mode they are constants.
Var batch_norm(Tape& tape, Var x, Var mean, Var var, Var gamma, Var beta, double eps);

// Mean softmax cross-entropy of logits[N, K] against hard labels.
Var softmax_cross_entropy(Tape& tape, Var logits, std::span<const int> labels);
// Mean of -sum_k p_k log softmax(logits / temperature)_k over rows.
Var soft_cross_entropy(Tape& tape, Var logits, Var targets, double temperature);

// Copy of flat[offset, offset + prod(shape)) reshaped to `shape`.
Var slice(Tape& tape, Var flat, std::size_t offset, Shape shape);

}  // namespace dwa::ops
