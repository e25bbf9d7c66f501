// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#include "dwa/arch.h"

#include "dwa/errors.h"

namespace dwa {
namespace {

std::string layer_tag(std::size_t i) { return "l" + std::to_string(i); }

}  // namespace

std::vector<Shape> ArchSpec::layer_output_shapes() const {
  std::vector<Shape> shapes;
  Shape cur = input_shape;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    const std::string where = "arch '" + name + "' layer " + std::to_string(i);
    switch (l.kind) {
      case LayerKind::kDense:
        if (cur.size() != 1) throw InvalidArgument(where + ": dense layer needs a flat input");
        if (l.width == 0) throw InvalidArgument(where + ": zero width");
        cur = {l.width};
        break;
      case LayerKind::kConv: {
        if (cur.size() != 3) throw InvalidArgument(where + ": conv layer needs [C, H, W] input");
        if (l.width == 0 || l.kernel == 0) throw InvalidArgument(where + ": zero width or kernel");
        if (l.padding == ops::Padding::kSame && l.kernel % 2 == 0) {
          throw InvalidArgument(where + ": same padding needs an odd kernel");
        }
        const std::size_t pad = l.padding == ops::Padding::kSame ? (l.kernel - 1) / 2 : 0;
        if (cur[1] + 2 * pad < l.kernel || cur[2] + 2 * pad < l.kernel) {
          throw InvalidArgument(where + ": kernel larger than input");
        }
        cur = {l.width, cur[1] + 2 * pad - l.kernel + 1, cur[2] + 2 * pad - l.kernel + 1};
        break;
      }
      case LayerKind::kGlobalAvgPool:
        if (cur.size() != 3) throw InvalidArgument(where + ": pooling needs [C, H, W] input");
        if (l.batch_norm) throw InvalidArgument(where + ": BN after pooling is not supported");
        cur = {cur[0]};
        break;
      case LayerKind::kFlatten:
        if (l.batch_norm) throw InvalidArgument(where + ": BN after flatten is not supported");
        cur = {shape_size(cur)};
        break;
    }
    shapes.push_back(cur);
  }
  return shapes;
}

void ArchSpec::validate() const {
  if (input_shape.empty() || shape_size(input_shape) == 0) {
    throw InvalidArgument("arch '" + name + "': empty input shape");
  }
  for (std::size_t d : input_shape) {
    if (d == 0) throw InvalidArgument("arch '" + name + "': zero input dimension");
  }
  if (layers.empty()) throw InvalidArgument("arch '" + name + "': no layers");
  const std::vector<Shape> shapes = layer_output_shapes();
  if (shapes.back().size() != 1 || layers.back().kind != LayerKind::kDense) {
    throw InvalidArgument("arch '" + name + "': last layer must be dense (the classifier)");
  }
  if (layers.back().batch_norm || layers.back().relu) {
    throw InvalidArgument("arch '" + name + "': classifier layer must output raw logits");
  }
  if (num_classes() < 2) throw InvalidArgument("arch '" + name + "': need at least 2 classes");
  if (bn_channels().empty()) {
    throw InvalidArgument("arch '" + name + "': at least one batch-normalized layer is required");
  }
  if (feature_split == 0 || feature_split >= layers.size()) {
    throw InvalidArgument("arch '" + name + "': feature split " + std::to_string(feature_split) +
                          " must be in [1, " + std::to_string(layers.size() - 1) + "]");
  }
}

std::size_t ArchSpec::num_classes() const {
  return layers.empty() ? 0 : layers.back().width;
}

std::vector<std::size_t> ArchSpec::bn_channels() const {
  std::vector<std::size_t> out;
  for (const LayerSpec& l : layers) {
    if (l.batch_norm && (l.kind == LayerKind::kDense || l.kind == LayerKind::kConv)) {
      out.push_back(l.width);
    }
  }
  return out;
}

Shape ArchSpec::feature_shape() const { return layer_output_shapes().at(feature_split - 1); }

ArchSpec mlp_bn_2(std::size_t input_dim, std::size_t num_classes, std::size_t hidden) {
  ArchSpec a;
  a.name = "mlp-bn-2";
  a.input_shape = {input_dim};
  a.layers = {
      {LayerKind::kDense, hidden, 0, ops::Padding::kValid, true, true},
      {LayerKind::kDense, hidden, 0, ops::Padding::kValid, true, true},
      {LayerKind::kDense, num_classes, 0, ops::Padding::kValid, false, false},
  };
  a.feature_split = 2;
  return a;
}

ArchSpec convnet_bn_3(Shape image_shape, std::size_t num_classes, std::size_t channels) {
  ArchSpec a;
  a.name = "convnet-bn-3";
  a.input_shape = std::move(image_shape);
  a.layers = {
      {LayerKind::kConv, channels, 3, ops::Padding::kSame, true, true},
      {LayerKind::kConv, channels, 3, ops::Padding::kSame, true, true},
      {LayerKind::kConv, channels, 3, ops::Padding::kSame, true, true},
      {LayerKind::kGlobalAvgPool, 0, 0, ops::Padding::kValid, false, false},
      {LayerKind::kDense, num_classes, 0, ops::Padding::kValid, false, false},
  };
  a.feature_split = 4;
  return a;
}

ArchSpec arch_preset(const std::string& name, const Shape& input_shape, std::size_t num_classes,
                     std::size_t width) {
  if (name == "mlp-bn-2") {
    if (input_shape.size() != 1) {
      throw InvalidArgument("mlp-bn-2 needs flat inputs, got " + shape_string(input_shape));
    }
    return mlp_bn_2(input_shape[0], num_classes, width ? width : 32);
  }
  if (name == "convnet-bn-3") {
    if (input_shape.size() != 3) {
      throw InvalidArgument("convnet-bn-3 needs [C, H, W] inputs, got " +
                            shape_string(input_shape));
    }
    return convnet_bn_3(input_shape, num_classes, width ? width : 8);
  }
  throw InvalidArgument("unknown architecture preset '" + name + "'");
}

const ParamView& ParamLayout::find(const std::string& name) const {
  for (const ParamView& v : views) {
    if (v.name == name) return v;
  }
  throw InvalidArgument("no parameter named '" + name + "'");
}

ParamLayout param_layout(const ArchSpec& arch) {
  ParamLayout layout;
  auto add = [&](std::string name, Shape shape) {
    ParamView v{std::move(name), layout.total, std::move(shape)};
    layout.total += v.size();
    layout.views.push_back(std::move(v));
  };
  Shape cur = arch.input_shape;
  const std::vector<Shape> shapes = arch.layer_output_shapes();
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const LayerSpec& l = arch.layers[i];
    const std::string tag = layer_tag(i);
    if (l.kind == LayerKind::kDense) {
      add(tag + ".weight", {l.width, cur[0]});
      add(tag + ".bias", {l.width});
    } else if (l.kind == LayerKind::kConv) {
      add(tag + ".weight", {l.width, cur[0], l.kernel, l.kernel});
      add(tag + ".bias", {l.width});
    }
    if (l.batch_norm && (l.kind == LayerKind::kDense || l.kind == LayerKind::kConv)) {
      add(tag + ".bn_gamma", {l.width});
      add(tag + ".bn_beta", {l.width});
    }
    cur = shapes[i];
  }
  return layout;
}

}  // namespace dwa
