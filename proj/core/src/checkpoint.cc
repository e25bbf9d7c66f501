// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#include "dwa/checkpoint.h"

#include <nlohmann/json.hpp>

#include "dwa/binary_io.h"
#include "dwa/errors.h"
#include "dwa/hash.h"
#include "dwa/manifest.h"

namespace dwa {
namespace {

using json = nlohmann::json;

constexpr std::string_view kMagic{"DWACKPT\0", 8};

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::kDense:
      return "dense";
    case LayerKind::kConv:
      return "conv";
    case LayerKind::kGlobalAvgPool:
      return "global_avg_pool";
    case LayerKind::kFlatten:
      return "flatten";
  }
  return "dense";
}

LayerKind parse_kind(const std::string& s) {
  if (s == "dense") return LayerKind::kDense;
  if (s == "conv") return LayerKind::kConv;
  if (s == "global_avg_pool") return LayerKind::kGlobalAvgPool;
  if (s == "flatten") return LayerKind::kFlatten;
  throw DataError("unknown layer kind '" + s + "'");
}

json arch_json(const ArchSpec& a) {
  json layers = json::array();
  for (const LayerSpec& l : a.layers) {
    layers.push_back({{"kind", kind_name(l.kind)},
                      {"width", l.width},
                      {"kernel", l.kernel},
                      {"padding", l.padding == ops::Padding::kSame ? "same" : "valid"},
                      {"batch_norm", l.batch_norm},
                      {"relu", l.relu}});
  }
  return json{{"name", a.name},
              {"input_shape", a.input_shape},
              {"layers", layers},
              {"feature_split", a.feature_split}};
}

ArchSpec arch_from(const json& j) {
  ArchSpec a;
  a.name = j.at("name").get<std::string>();
  a.input_shape = j.at("input_shape").get<Shape>();
  a.feature_split = j.at("feature_split").get<std::size_t>();
  for (const json& l : j.at("layers")) {
    LayerSpec s;
    s.kind = parse_kind(l.at("kind").get<std::string>());
    s.width = l.at("width").get<std::size_t>();
    s.kernel = l.at("kernel").get<std::size_t>();
    s.padding = l.at("padding").get<std::string>() == "valid" ? ops::Padding::kValid
                                                              : ops::Padding::kSame;
    s.batch_norm = l.at("batch_norm").get<bool>();
    s.relu = l.at("relu").get<bool>();
    a.layers.push_back(s);
  }
  a.validate();
  return a;
}

json meta_json(const TrainMeta& m) {
  return json{{"epochs", m.epochs},
              {"final_loss", m.final_loss},
              {"train_accuracy", m.train_accuracy},
              {"grad_norm", m.grad_norm},
              {"seed", m.seed}};
}

TrainMeta meta_from(const json& j) {
  TrainMeta m;
  m.epochs = j.at("epochs").get<std::size_t>();
  m.final_loss = j.at("final_loss").get<double>();
  m.train_accuracy = j.at("train_accuracy").get<double>();
  m.grad_norm = j.at("grad_norm").get<double>();
  m.seed = j.at("seed").get<std::uint64_t>();
  return m;
}

}  // namespace

std::uint64_t layout_hash(const ArchSpec& arch) {
  Fnv1a h;
  const ParamLayout layout = param_layout(arch);
  for (const ParamView& v : layout.views) {
    h.text(v.name).u64(v.offset).u64(v.shape.size());
    for (std::size_t d : v.shape) h.u64(d);
  }
  h.u64(layout.total);
  for (std::size_t c : arch.bn_channels()) h.u64(c);
  return h.digest();
}

std::string arch_to_json(const ArchSpec& arch) { return arch_json(arch).dump(); }

ArchSpec arch_from_json(const std::string& text) {
  try {
    return arch_from(json::parse(text));
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed architecture description: ") + e.what());
  }
}

std::string serialize_model(const Model& model) {
  model.validate();
  const json header{{"arch", arch_json(model.arch)},
                    {"bn_channels", model.arch.bn_channels()},
                    {"layout_hash", hex64(layout_hash(model.arch))},
                    {"bn_eps", model.bn_eps},
                    {"bn_momentum", model.bn_momentum},
                    {"meta", meta_json(model.meta)}};
  const std::string header_text = header.dump();

  ByteWriter payload;
  payload.u64_le(model.params.size());
  payload.f64s_le(model.params);
  payload.u64_le(model.running_stats.layers.size());
  for (const BnLayerStats& l : model.running_stats.layers) {
    payload.u64_le(l.mean.size());
    payload.f64s_le(l.mean);
    payload.f64s_le(l.var);
  }

  ByteWriter out;
  out.bytes(kMagic);
  out.u32_le(kCheckpointVersion);
  out.u64_le(header_text.size());
  out.bytes(header_text);
  out.bytes(payload.str());
  out.u64_le(fnv1a64(payload.str()));
  return out.str();
}

Model deserialize_model(const std::string& bytes, const std::string& origin) {
  ByteReader in(bytes, origin);
  if (bytes.size() < kMagic.size() || in.bytes(kMagic.size(), "magic") != kMagic) {
    in.fail(0, "not a model checkpoint (bad magic)");
  }
  const std::size_t version_at = in.offset();
  const std::uint32_t version = in.u32_le("version");
  if (version != kCheckpointVersion) {
    in.fail(version_at, "checkpoint version " + std::to_string(version) + ", expected " +
                            std::to_string(kCheckpointVersion));
  }
  const std::size_t header_at = in.offset();
  const std::uint64_t header_len = in.u64_le("header length");
  if (header_len > in.remaining()) in.fail(header_at, "header length exceeds file size");
  const std::string_view header_text = in.bytes(header_len, "header");

  Model m;
  std::string stored_hash;
  try {
    const json header = json::parse(header_text);
    m.arch = arch_from(header.at("arch"));
    stored_hash = header.at("layout_hash").get<std::string>();
    if (header.at("bn_channels").get<std::vector<std::size_t>>() != m.arch.bn_channels()) {
      in.fail(header_at + 8, "BN layout disagrees with the architecture");
    }
    m.bn_eps = header.at("bn_eps").get<double>();
    m.bn_momentum = header.at("bn_momentum").get<double>();
    m.meta = meta_from(header.at("meta"));
  } catch (const json::exception& e) {
    in.fail(header_at + 8, std::string("malformed header: ") + e.what());
  } catch (const InvalidArgument& e) {
    in.fail(header_at + 8, e.what());
  }
  if (stored_hash != hex64(layout_hash(m.arch))) {
    in.fail(header_at + 8, "layout hash mismatch (stored " + stored_hash + ", computed " +
                               hex64(layout_hash(m.arch)) + ")");
  }
  m.layout = param_layout(m.arch);

  const std::size_t payload_at = in.offset();
  const std::uint64_t count = in.u64_le("parameter count");
  if (count != m.layout.total) {
    in.fail(payload_at, "payload holds " + std::to_string(count) + " parameters, layout needs " +
                            std::to_string(m.layout.total));
  }
  if (count > in.remaining() / 8) in.fail(in.offset(), "truncated parameter payload");
  m.params.resize(count);
  in.f64s_le(m.params, "parameters");
  const std::size_t layers_at = in.offset();
  const std::vector<std::size_t> channels = m.arch.bn_channels();
  if (in.u64_le("BN layer count") != channels.size()) {
    in.fail(layers_at, "BN layer count disagrees with the architecture");
  }
  for (std::size_t c : channels) {
    const std::size_t at = in.offset();
    if (in.u64_le("BN channel count") != c) in.fail(at, "BN channel count mismatch");
    BnLayerStats l;
    l.mean.resize(c);
    l.var.resize(c);
    in.f64s_le(l.mean, "running means");
    in.f64s_le(l.var, "running variances");
    m.running_stats.layers.push_back(std::move(l));
  }
  const std::string_view payload =
      std::string_view(bytes).substr(payload_at, in.offset() - payload_at);
  const std::size_t sum_at = in.offset();
  if (in.u64_le("checksum") != fnv1a64(payload)) in.fail(sum_at, "payload checksum mismatch");
  if (in.remaining() != 0) in.fail(in.offset(), "trailing bytes after checksum");
  try {
    m.validate();
  } catch (const Error& e) {
    throw DataError(origin + ": " + e.what());
  }
  return m;
}

void save_teacher(const TeacherModel& model, const std::string& path) {
  write_file(path, serialize_model(model));
}

TeacherModel load_teacher(const std::string& path) {
  return deserialize_model(read_file(path), path);
}

}  // namespace dwa
