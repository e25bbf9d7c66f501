// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dwa/ops.h"
#include "dwa/tensor.h"

namespace dwa {

enum class LayerKind { kDense, kConv, kGlobalAvgPool, kFlatten };

struct LayerSpec {
  LayerKind kind = LayerKind::kDense;
  std::size_t width = 0;  // output features (dense) or channels (conv)
  std::size_t kernel = 3;
  ops::Padding padding = ops::Padding::kSame;
  bool batch_norm = false;
  bool relu = false;

  bool operator==(const LayerSpec&) const = default;
};

// Network description. Layers [0, feature_split) form the feature extractor
// g; the remaining layers form the classifier head f.
struct ArchSpec {
  std::string name;
  Shape input_shape;  // per-instance shape, e.g. {2} or {1, 8, 8}
  std::vector<LayerSpec> layers;
  std::size_t feature_split = 0;

  // Throws InvalidArgument when the description is inconsistent or has no
  // batch-normalized layer.
  void validate() const;

  std::size_t num_classes() const;
  // Channel count of each BN layer in network order.
  std::vector<std::size_t> bn_channels() const;
  // Per-instance shape after each layer.
  std::vector<Shape> layer_output_shapes() const;
  Shape feature_shape() const;

  bool operator==(const ArchSpec&) const = default;
};

// Dense -> BN -> ReLU twice, then a dense classifier. Features are the
// second hidden layer's activations.
ArchSpec mlp_bn_2(std::size_t input_dim, std::size_t num_classes, std::size_t hidden = 32);

// Three 3x3 conv -> BN -> ReLU blocks, global average pooling, dense head.
ArchSpec convnet_bn_3(Shape image_shape, std::size_t num_classes, std::size_t channels = 8);

// Looks up "mlp-bn-2" or "convnet-bn-3".
ArchSpec arch_preset(const std::string& name, const Shape& input_shape, std::size_t num_classes,
                     std::size_t width = 0);

// Named region of the flat parameter vector.
struct ParamView {
  std::string name;
  std::size_t offset = 0;
  Shape shape;
  std::size_t size() const { return shape_size(shape); }
};

struct ParamLayout {
  std::vector<ParamView> views;
  std::size_t total = 0;

  const ParamView& find(const std::string& name) const;
};

// Weights and bias per dense/conv layer ("l<i>.weight", "l<i>.bias"), plus
// BN scale/shift ("l<i>.bn_gamma", "l<i>.bn_beta") where present.
ParamLayout param_layout(const ArchSpec& arch);

}  // namespace dwa
