// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#include "dwa/synthetic_io.h"

#include <filesystem>

#include <nlohmann/json.hpp>

#include "dwa/binary_io.h"
#include "dwa/config.h"
#include "dwa/errors.h"

namespace dwa {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr std::string_view kTensorMagic{"DWATNSR\0", 8};
constexpr std::string_view kLabelMagic{"DWALABL\0", 8};

std::string encode_labels(const std::vector<int>& labels) {
  ByteWriter w;
  w.bytes(kLabelMagic);
  w.u64_le(labels.size());
  for (int y : labels) w.i32_le(y);
  return w.str();
}

std::vector<int> decode_labels(const std::string& bytes, const std::string& origin) {
  ByteReader in(bytes, origin);
  if (bytes.size() < kLabelMagic.size() || in.bytes(8, "magic") != kLabelMagic) {
    in.fail(0, "not a label file (bad magic)");
  }
  const std::size_t count_at = in.offset();
  const std::uint64_t n = in.u64_le("label count");
  if (n * 4 != in.remaining()) {
    in.fail(count_at, "label count " + std::to_string(n) + " disagrees with file size");
  }
  std::vector<int> labels(n);
  for (int& y : labels) y = in.i32_le("label");
  return labels;
}

json slot_json(const SlotRecord& s) {
  return json{{"seed", s.seed},
              {"delta_norm", s.delta_norm},
              {"initial_loss", s.initial_loss},
              {"final_loss", s.final_loss},
              {"adjust_seconds", s.adjust_seconds},
              {"synth_seconds", s.synth_seconds}};
}

SlotRecord slot_from(const json& j) {
  SlotRecord s;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.delta_norm = j.at("delta_norm").get<double>();
  s.initial_loss = j.at("initial_loss").get<double>();
  s.final_loss = j.at("final_loss").get<double>();
  s.adjust_seconds = j.at("adjust_seconds").get<double>();
  s.synth_seconds = j.at("synth_seconds").get<double>();
  return s;
}

}  // namespace

std::string encode_tensor(const Tensor& t) {
  ByteWriter w;
  w.bytes(kTensorMagic);
  w.u32_le(static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) w.u64_le(d);
  w.f64s_le(t.data());
  return w.str();
}

Tensor decode_tensor(const std::string& bytes, const std::string& origin) {
  ByteReader in(bytes, origin);
  if (bytes.size() < kTensorMagic.size() || in.bytes(8, "magic") != kTensorMagic) {
    in.fail(0, "not a tensor file (bad magic)");
  }
  const std::uint32_t rank = in.u32_le("rank");
  if (rank == 0 || rank > 8) in.fail(8, "implausible tensor rank " + std::to_string(rank));
  Shape shape(rank);
  std::size_t count = 1;
  for (std::size_t& d : shape) {
    const std::size_t at = in.offset();
    d = in.u64_le("dimension");
    if (d == 0 || d > (std::size_t{1} << 40)) in.fail(at, "bad dimension");
    count *= d;
  }
  if (count * 8 != in.remaining()) {
    in.fail(in.offset(), "payload of " + std::to_string(in.remaining()) + " bytes for " +
                             std::to_string(count) + " elements");
  }
  std::vector<double> data(count);
  in.f64s_le(data, "elements");
  try {
    return Tensor(std::move(shape), std::move(data));
  } catch (const Error& e) {
    throw DataError(origin + ": " + e.what());
  }
}

std::string synthesis_manifest_json(const SyntheticSet& set) {
  const SynthesisManifest& m = set.manifest;
  json slots = json::array();
  for (const SlotRecord& s : m.slots) slots.push_back(slot_json(s));
  json j{{"run", json::parse(manifest_to_json(m.run))},
         {"ipc", m.ipc},
         {"num_classes", m.num_classes},
         {"instances", set.size()},
         {"mode", m.mode},
         {"gradient_mode", m.gradient_mode},
         {"bn_source", m.bn_source},
         {"sigma_theta", m.random_sigma},
         {"slots", slots},
         {"config", json::parse(m.config_json)},
         {"soft_labels", set.soft_labels.has_value()},
         {"soft_temperature", set.soft_temperature}};
  return j.dump(2) + "\n";
}

void save_synthetic(const SyntheticSet& set, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(dir + ": " + ec.message());
  write_file(dir + "/instances.bin", encode_tensor(set.instances));
  write_file(dir + "/labels.bin", encode_labels(set.labels));
  if (set.soft_labels) {
    write_file(dir + "/soft_labels.bin", encode_tensor(*set.soft_labels));
  } else {
    fs::remove(dir + "/soft_labels.bin", ec);
  }
  write_file(dir + "/manifest.json", synthesis_manifest_json(set));
}

SyntheticSet load_synthetic(const std::string& dir) {
  for (const char* f : {"instances.bin", "labels.bin", "manifest.json"}) {
    if (!fs::exists(dir + "/" + f)) throw DataError(dir + ": missing " + f);
  }
  SyntheticSet set;
  set.instances = decode_tensor(read_file(dir + "/instances.bin"), dir + "/instances.bin");
  set.labels = decode_labels(read_file(dir + "/labels.bin"), dir + "/labels.bin");
  const std::string manifest_path = dir + "/manifest.json";
  bool has_soft = false;
  std::size_t declared = 0;
  try {
    const json j = json::parse(read_file(manifest_path));
    SynthesisManifest& m = set.manifest;
    m.run = manifest_from_json(j.at("run").dump());
    m.ipc = j.at("ipc").get<std::size_t>();
    m.num_classes = j.at("num_classes").get<std::size_t>();
    declared = j.at("instances").get<std::size_t>();
    m.mode = j.at("mode").get<std::string>();
    m.gradient_mode = j.at("gradient_mode").get<std::string>();
    m.bn_source = j.at("bn_source").get<std::string>();
    m.random_sigma = j.at("sigma_theta").get<double>();
    for (const json& s : j.at("slots")) m.slots.push_back(slot_from(s));
    m.config_json = j.at("config").dump();
    has_soft = j.at("soft_labels").get<bool>();
    set.soft_temperature = j.at("soft_temperature").get<double>();
  } catch (const json::exception& e) {
    throw DataError(manifest_path + ": " + e.what());
  }

  const SynthesisManifest& m = set.manifest;
  const std::size_t n = set.instances.dim(0);
  if (declared != m.ipc * m.num_classes || n != declared) {
    throw DataError(dir + ": manifest declares ipc " + std::to_string(m.ipc) + " x " +
                    std::to_string(m.num_classes) + " classes but instances.bin holds " +
                    std::to_string(n));
  }
  if (set.labels.size() != n) {
    throw DataError(dir + ": " + std::to_string(set.labels.size()) + " labels for " +
                    std::to_string(n) + " instances");
  }
  std::vector<std::size_t> per_class(m.num_classes, 0);
  for (int y : set.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= m.num_classes) {
      throw DataError(dir + ": label " + std::to_string(y) + " out of range");
    }
    ++per_class[static_cast<std::size_t>(y)];
  }
  for (std::size_t c = 0; c < m.num_classes; ++c) {
    if (per_class[c] != m.ipc) {
      throw DataError(dir + ": class " + std::to_string(c) + " has " +
                      std::to_string(per_class[c]) + " instances, expected " +
                      std::to_string(m.ipc));
    }
  }
  if (m.slots.size() != m.ipc) throw DataError(dir + ": slot records disagree with ipc");
  if (config_block_hash(m.config_json) != m.run.config_hash) {
    throw DataError(manifest_path + ": config hash does not match the stored config block");
  }
  if (has_soft) {
    set.soft_labels = decode_tensor(read_file(dir + "/soft_labels.bin"), dir + "/soft_labels.bin");
    if (set.soft_labels->rank() != 2 || set.soft_labels->dim(0) != n ||
        set.soft_labels->dim(1) != m.num_classes) {
      throw DataError(dir + ": soft labels shape disagrees with the instances");
    }
  }
  return set;
}

}  // namespace dwa
