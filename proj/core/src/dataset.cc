// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#include "dwa/dataset.h"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <string_view>

#include "dwa/binary_io.h"
#include "dwa/errors.h"
#include "dwa/rng.h"
#include "text_format.h"

namespace dwa {
namespace {

std::size_t channel_count(const Tensor& inputs) { return inputs.dim(1); }

std::size_t channel_stride(const Tensor& inputs) {
  std::size_t s = 1;
  for (std::size_t k = 2; k < inputs.rank(); ++k) s *= inputs.dim(k);
  return s;
}

std::size_t idx_element_size(std::uint8_t type) {
  switch (type) {
    case 0x08:
    case 0x09:
      return 1;
    case 0x0B:
      return 2;
    case 0x0C:
    case 0x0D:
      return 4;
    case 0x0E:
      return 8;
    default:
      return 0;
  }
}

struct IdxArray {
  Shape dims;
  std::vector<double> values;
};

IdxArray parse_idx(const std::string& bytes, const std::string& origin) {
  ByteReader in(bytes, origin);
  const std::uint8_t z0 = in.u8("magic");
  const std::uint8_t z1 = in.u8("magic");
  if (z0 != 0 || z1 != 0) in.fail(0, "bad IDX magic number");
  const std::uint8_t type = in.u8("type code");
  const std::size_t width = idx_element_size(type);
  if (width == 0) in.fail(2, "unsupported IDX element type " + std::to_string(type));
  const std::uint8_t rank = in.u8("rank");
  if (rank == 0) in.fail(3, "IDX rank must be positive");
  IdxArray out;
  for (std::uint8_t k = 0; k < rank; ++k) {
    const std::size_t at = in.offset();
    const std::uint32_t d = in.u32_be("dimension");
    if (d == 0) in.fail(at, "zero IDX dimension");
    out.dims.push_back(d);
  }
  const std::size_t count = shape_size(out.dims);
  if (in.remaining() != count * width) {
    in.fail(in.offset(), "payload holds " + std::to_string(in.remaining()) + " bytes, dims need " +
                             std::to_string(count * width));
  }
  out.values.resize(count);
  for (double& v : out.values) {
    std::string_view raw = in.bytes(width, "element");
    std::uint64_t u = 0;
    for (char c : raw) u = (u << 8) | static_cast<std::uint8_t>(c);
    switch (type) {
      case 0x08:
        v = static_cast<double>(u);
        break;
      case 0x09:
        v = static_cast<double>(static_cast<std::int8_t>(u));
        break;
      case 0x0B:
        v = static_cast<double>(static_cast<std::int16_t>(u));
        break;
      case 0x0C:
        v = static_cast<double>(static_cast<std::int32_t>(u));
        break;
      case 0x0D:
        v = static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(u)));
        break;
      default:
        v = std::bit_cast<double>(u);
    }
    if (!std::isfinite(v)) in.fail(in.offset() - width, "non-finite element");
  }
  return out;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

void check_labels(const std::vector<int>& labels, std::size_t num_classes,
                  const std::string& origin) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || (num_classes > 0 && static_cast<std::size_t>(labels[i]) >= num_classes)) {
      throw DataError(origin + ": label " + std::to_string(labels[i]) + " of instance " +
                      std::to_string(i) + " out of range");
    }
  }
}

LabeledData load_idx_split(const std::string& images, const std::string& labels) {
  LabeledData d{read_idx_images(images), read_idx_labels(labels)};
  if (d.inputs.dim(0) != d.labels.size()) {
    throw DataError(labels + ": " + std::to_string(d.labels.size()) + " labels for " +
                    std::to_string(d.inputs.dim(0)) + " images in " + images);
  }
  return d;
}

std::size_t infer_classes(const std::vector<int>& a, const std::vector<int>& b) {
  int top = -1;
  for (int y : a) top = std::max(top, y);
  for (int y : b) top = std::max(top, y);
  return static_cast<std::size_t>(top + 1);
}

}  // namespace

void ToyGaussians::validate() const {
  if (classes < 2) throw InvalidArgument("toy dataset: needs at least 2 classes");
  if (dim == 0 || modes == 0) throw InvalidArgument("toy dataset: dim and modes must be positive");
  if (n < classes || validation < classes) {
    throw InvalidArgument("toy dataset: each split needs at least one instance per class");
  }
  for (double v : {spread, mode_spread, noise}) {
    if (!std::isfinite(v) || v < 0.0) {
      throw InvalidArgument("toy dataset: spreads must be finite and non-negative");
    }
  }
}

LabeledData toy_split(const ToyGaussians& p, bool validation) {
  p.validate();
  Rng centers_rng(p.seed);
  std::vector<double> centers(p.classes * p.modes * p.dim);
  std::vector<double> base(p.dim);
  for (std::size_t c = 0; c < p.classes; ++c) {
    for (double& b : base) b = p.spread * centers_rng.normal();
    for (std::size_t m = 0; m < p.modes; ++m) {
      for (std::size_t k = 0; k < p.dim; ++k) {
        centers[(c * p.modes + m) * p.dim + k] = base[k] + p.mode_spread * centers_rng.normal();
      }
    }
  }
  Rng rng(mix_seed(p.seed, validation ? 2 : 1));
  const std::size_t count = validation ? p.validation : p.n;
  std::vector<int> labels(count);
  for (std::size_t i = 0; i < count; ++i) labels[i] = static_cast<int>(i % p.classes);
  rng.shuffle(std::span<int>(labels));
  std::vector<double> x(count * p.dim);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t m = rng.index(p.modes);
    const double* mu = &centers[(static_cast<std::size_t>(labels[i]) * p.modes + m) * p.dim];
    for (std::size_t k = 0; k < p.dim; ++k) x[i * p.dim + k] = mu[k] + p.noise * rng.normal();
  }
  return {Tensor({count, p.dim}, std::move(x)), std::move(labels)};
}

Tensor parse_idx_images(const std::string& bytes, const std::string& origin) {
  IdxArray a = parse_idx(bytes, origin);
  if (a.dims.size() == 3) {
    return Tensor({a.dims[0], 1, a.dims[1], a.dims[2]}, std::move(a.values));
  }
  if (a.dims.size() == 2 || a.dims.size() == 4) return Tensor(a.dims, std::move(a.values));
  throw DataError(origin + ": byte offset 3: image files need rank 2, 3 or 4, got " +
                  std::to_string(a.dims.size()));
}

std::vector<int> parse_idx_labels(const std::string& bytes, const std::string& origin) {
  IdxArray a = parse_idx(bytes, origin);
  if (a.dims.size() != 1) {
    throw DataError(origin + ": byte offset 3: label files need rank 1, got " +
                    std::to_string(a.dims.size()));
  }
  std::vector<int> labels(a.values.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double v = a.values[i];
    if (v < 0.0 || v != std::floor(v) || v > 1e9) {
      throw DataError(origin + ": label " + std::to_string(i) + " is not a class index");
    }
    labels[i] = static_cast<int>(v);
  }
  return labels;
}

Tensor read_idx_images(const std::string& path) { return parse_idx_images(read_file(path), path); }

std::vector<int> read_idx_labels(const std::string& path) {
  return parse_idx_labels(read_file(path), path);
}

LabeledData parse_csv_dataset(const std::string& text, const std::string& origin,
                              std::size_t num_classes) {
  std::vector<std::string_view> lines;
  std::string_view rest = text;
  while (!rest.empty()) {
    const std::size_t nl = rest.find('\n');
    std::string_view line = rest.substr(0, nl);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (nl == std::string_view::npos) break;
    rest.remove_prefix(nl + 1);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw DataError(origin + ": line 1: missing header");
  const std::vector<std::string_view> header = split_fields(lines[0]);
  if (header.size() < 2 || header[0] != "label") {
    throw DataError(origin + ": line 1: header must start with 'label' and name a feature");
  }
  const std::size_t width = header.size() - 1;
  if (lines.size() < 2) throw DataError(origin + ": line 2: no data rows");
  std::vector<int> labels;
  std::vector<double> values;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    const std::string where = origin + ": line " + std::to_string(ln + 1) + ": ";
    const std::vector<std::string_view> f = split_fields(lines[ln]);
    if (f.size() != header.size()) {
      throw DataError(where + "expected " + std::to_string(header.size()) + " fields, got " +
                      std::to_string(f.size()));
    }
    int label = 0;
    auto [lp, lec] = std::from_chars(f[0].data(), f[0].data() + f[0].size(), label);
    if (lec != std::errc() || lp != f[0].data() + f[0].size()) {
      throw DataError(where + "label '" + std::string(f[0]) + "' is not an integer");
    }
    if (label < 0 || (num_classes > 0 && static_cast<std::size_t>(label) >= num_classes)) {
      throw DataError(where + "label " + std::to_string(label) + " out of range");
    }
    labels.push_back(label);
    for (std::size_t k = 1; k < f.size(); ++k) {
      double v = 0.0;
      auto [p, ec] = std::from_chars(f[k].data(), f[k].data() + f[k].size(), v);
      if (ec != std::errc() || p != f[k].data() + f[k].size() || !std::isfinite(v)) {
        throw DataError(where + "field " + std::to_string(k + 1) + " '" + std::string(f[k]) +
                        "' is not a finite number");
      }
      values.push_back(v);
    }
  }
  const std::size_t n = labels.size();
  return {Tensor({n, width}, std::move(values)), std::move(labels)};
}

LabeledData read_csv_dataset(const std::string& path, std::size_t num_classes) {
  return parse_csv_dataset(read_file(path), path, num_classes);
}

std::string format_csv_dataset(const LabeledData& data) {
  const std::size_t n = data.size();
  const std::size_t width = n == 0 ? 0 : data.inputs.size() / n;
  std::string out = "label";
  for (std::size_t k = 0; k < width; ++k) out += ",x" + std::to_string(k);
  out += '\n';
  std::span<const double> x = data.inputs.data();
  for (std::size_t i = 0; i < n; ++i) {
    out += std::to_string(data.labels[i]);
    for (std::size_t k = 0; k < width; ++k) {
      out += ',';
      out += detail::format_double(x[i * width + k]);
    }
    out += '\n';
  }
  return out;
}

void write_csv_dataset(const LabeledData& data, const std::string& path) {
  write_file(path, format_csv_dataset(data));
}

Normalization fit_normalization(const Tensor& inputs) {
  if (inputs.rank() < 2) throw ShapeError("fit_normalization", "expected [N, ...] inputs");
  const std::size_t n = inputs.dim(0), channels = channel_count(inputs),
                    stride = channel_stride(inputs);
  std::span<const double> x = inputs.data();
  Normalization norm;
  norm.mean.assign(channels, 0.0);
  norm.stddev.assign(channels, 0.0);
  const double count = static_cast<double>(n * stride);
  for (std::size_t c = 0; c < channels; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t s = 0; s < stride; ++s) total += x[(i * channels + c) * stride + s];
    }
    const double mu = total / count;
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t s = 0; s < stride; ++s) {
        const double d = x[(i * channels + c) * stride + s] - mu;
        sq += d * d;
      }
    }
    const double sd = std::sqrt(sq / count);
    norm.mean[c] = mu;
    norm.stddev[c] = sd > 1e-12 ? sd : 1.0;
  }
  return norm;
}

Tensor apply_normalization(const Tensor& inputs, const Normalization& norm) {
  if (inputs.rank() < 2 || norm.mean.size() != channel_count(inputs) ||
      norm.stddev.size() != norm.mean.size()) {
    throw ShapeError("apply_normalization", "normalization has " +
                                                std::to_string(norm.mean.size()) +
                                                " channels for inputs " +
                                                shape_string(inputs.shape()));
  }
  Tensor out = inputs;
  const std::size_t n = inputs.dim(0), channels = channel_count(inputs),
                    stride = channel_stride(inputs);
  std::span<double> x = out.data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t s = 0; s < stride; ++s) {
        double& v = x[(i * channels + c) * stride + s];
        v = (v - norm.mean[c]) / norm.stddev[c];
      }
    }
  }
  return out;
}

Dataset load_dataset(const DatasetSource& source) {
  Dataset d;
  switch (source.format) {
    case DatasetFormat::kToy:
      d.train = toy_split(source.toy, false);
      d.validation = toy_split(source.toy, true);
      d.num_classes = source.toy.classes;
      break;
    case DatasetFormat::kIdx:
      if (source.validation_images.empty() || source.validation_labels.empty()) {
        throw DataError("IDX source needs validation image and label files");
      }
      d.train = load_idx_split(source.train_images, source.train_labels);
      d.validation = load_idx_split(source.validation_images, source.validation_labels);
      break;
    case DatasetFormat::kCsv:
      if (source.validation_images.empty()) throw DataError("CSV source needs a validation file");
      d.train = read_csv_dataset(source.train_images, source.num_classes);
      d.validation = read_csv_dataset(source.validation_images, source.num_classes);
      break;
  }
  if (source.format != DatasetFormat::kToy) {
    d.num_classes = source.num_classes > 0 ? source.num_classes
                                           : infer_classes(d.train.labels, d.validation.labels);
    check_labels(d.train.labels, d.num_classes, source.train_labels.empty()
                                                    ? source.train_images
                                                    : source.train_labels);
    check_labels(d.validation.labels, d.num_classes, source.validation_labels.empty()
                                                         ? source.validation_images
                                                         : source.validation_labels);
    if (d.train.instance_shape() != d.validation.instance_shape()) {
      throw DataError("train and validation instance shapes differ");
    }
  }
  if (source.normalize) {
    d.normalization = fit_normalization(d.train.inputs);
    d.train.inputs = apply_normalization(d.train.inputs, d.normalization);
    d.validation.inputs = apply_normalization(d.validation.inputs, d.normalization);
  }
  return d;
}

}  // namespace dwa
