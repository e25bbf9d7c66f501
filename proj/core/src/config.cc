// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#include "dwa/config.h"

#include <filesystem>
#include <functional>
#include <map>

#include <nlohmann/json.hpp>

#include "dwa/binary_io.h"
#include "dwa/errors.h"
#include "dwa/hash.h"

namespace dwa {
namespace {

using json = nlohmann::json;

const char* bn_source_name(BnSource s) {
  return s == BnSource::kSinglePass ? "single_pass" : "literal_two_pass";
}
BnSource parse_bn_source(const std::string& s) {
  if (s == "single_pass") return BnSource::kSinglePass;
  if (s == "literal_two_pass") return BnSource::kLiteralTwoPass;
  throw InvalidArgument("config: bn_source must be single_pass or literal_two_pass");
}
const char* bn_mode_name(BnMode m) { return m == BnMode::kBatch ? "batch" : "running"; }
BnMode parse_bn_mode(const std::string& s) {
  if (s == "batch") return BnMode::kBatch;
  if (s == "running") return BnMode::kRunning;
  throw InvalidArgument("config: bn mode must be batch or running");
}
const char* dataset_format_name(DatasetFormat f) {
  switch (f) {
    case DatasetFormat::kIdx: return "idx";
    case DatasetFormat::kCsv: return "csv";
    default: return "toy";
  }
}
DatasetFormat parse_dataset_format(const std::string& s) {
  if (s == "toy") return DatasetFormat::kToy;
  if (s == "idx") return DatasetFormat::kIdx;
  if (s == "csv") return DatasetFormat::kCsv;
  throw InvalidArgument("config: dataset format must be toy, idx or csv");
}
const char* gradient_mode_name(GradientMode m) {
  return m == GradientMode::kRaw ? "raw" : "unit_normalized";
}
GradientMode parse_gradient_mode(const std::string& s) {
  if (s == "raw") return GradientMode::kRaw;
  if (s == "unit_normalized") return GradientMode::kUnitNormalized;
  throw InvalidArgument("config: gradient_mode must be raw or unit_normalized");
}

using Setter = std::function<void(const json&)>;

void apply_section(const json& obj, const std::map<std::string, Setter>& setters,
                   const std::string& section) {
  if (!obj.is_object()) throw InvalidArgument("config: " + section + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    auto it = setters.find(key);
    if (it == setters.end()) {
      throw InvalidArgument("config: unknown key '" + key + "' in " + section);
    }
    try {
      it->second(value);
    } catch (const json::exception& e) {
      throw InvalidArgument("config: bad value for '" + key + "' in " + section + ": " + e.what());
    }
  }
}

void read_betas(const json& v, double& b1, double& b2) {
  if (!v.is_array() || v.size() != 2) throw InvalidArgument("config: betas must be [beta1, beta2]");
  b1 = v.at(0).get<double>();
  b2 = v.at(1).get<double>();
}

json parse_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(std::string("config: malformed JSON: ") + e.what());
  }
}

json distill_to_json(const DistillConfig& c) {
  return json{{"ipc", c.ipc},
              {"iterations", c.iterations},
              {"learning_rate", c.learning_rate},
              {"betas", {c.beta1, c.beta2}},
              {"lambda_mean", c.weights.lambda_mean},
              {"lambda_var", c.weights.lambda_var},
              {"rho", c.adjustment.rho},
              {"steps_k", c.adjustment.steps_k},
              {"gradient_mode", gradient_mode_name(c.adjustment.gradient_mode)},
              {"adjustment_seed", c.adjustment.seed},
              {"adjustment_bn_mode", bn_mode_name(c.adjustment.bn_mode)},
              {"mode", to_string(c.mode)},
              {"sigma_theta", c.random_sigma},
              {"seed", c.seed},
              {"bn_source", bn_source_name(c.bn_source)},
              {"bn_mode", bn_mode_name(c.bn_mode)}};
}

void apply_distill(const json& obj, DistillConfig& c, const std::string& section) {
  apply_section(
      obj,
      {{"ipc", [&](const json& v) { c.ipc = v.get<std::size_t>(); }},
       {"iterations", [&](const json& v) { c.iterations = v.get<std::size_t>(); }},
       {"learning_rate", [&](const json& v) { c.learning_rate = v.get<double>(); }},
       {"betas", [&](const json& v) { read_betas(v, c.beta1, c.beta2); }},
       {"lambda_mean", [&](const json& v) { c.weights.lambda_mean = v.get<double>(); }},
       {"lambda_var", [&](const json& v) { c.weights.lambda_var = v.get<double>(); }},
       {"rho", [&](const json& v) { c.adjustment.rho = v.get<double>(); }},
       {"steps_k", [&](const json& v) { c.adjustment.steps_k = v.get<std::size_t>(); }},
       {"gradient_mode",
        [&](const json& v) { c.adjustment.gradient_mode = parse_gradient_mode(v.get<std::string>()); }},
       {"adjustment_seed", [&](const json& v) { c.adjustment.seed = v.get<std::uint64_t>(); }},
       {"adjustment_bn_mode",
        [&](const json& v) { c.adjustment.bn_mode = parse_bn_mode(v.get<std::string>()); }},
       {"mode", [&](const json& v) { c.mode = parse_adjustment_mode(v.get<std::string>()); }},
       {"sigma_theta", [&](const json& v) { c.random_sigma = v.get<double>(); }},
       {"seed", [&](const json& v) { c.seed = v.get<std::uint64_t>(); }},
       {"bn_source", [&](const json& v) { c.bn_source = parse_bn_source(v.get<std::string>()); }},
       {"bn_mode", [&](const json& v) { c.bn_mode = parse_bn_mode(v.get<std::string>()); }},
       {"threads", [&](const json& v) { c.threads = v.get<std::size_t>(); }}},
      section);
}

json train_to_json(const TrainConfig& c) {
  return json{{"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"learning_rate", c.learning_rate},
              {"betas", {c.adam.beta1, c.adam.beta2}},
              {"weight_decay", c.adam.weight_decay},
              {"cosine", c.cosine},
              {"seed", c.seed},
              {"temperature", c.temperature},
              {"refine_steps", c.refine_steps},
              {"refine_learning_rate", c.refine_learning_rate}};
}

void apply_train(const json& obj, TrainConfig& c, const std::string& section) {
  apply_section(
      obj,
      {{"epochs", [&](const json& v) { c.epochs = v.get<std::size_t>(); }},
       {"batch_size", [&](const json& v) { c.batch_size = v.get<std::size_t>(); }},
       {"learning_rate", [&](const json& v) { c.learning_rate = v.get<double>(); }},
       {"betas", [&](const json& v) { read_betas(v, c.adam.beta1, c.adam.beta2); }},
       {"weight_decay", [&](const json& v) { c.adam.weight_decay = v.get<double>(); }},
       {"cosine", [&](const json& v) { c.cosine = v.get<bool>(); }},
       {"seed", [&](const json& v) { c.seed = v.get<std::uint64_t>(); }},
       {"temperature", [&](const json& v) { c.temperature = v.get<double>(); }},
       {"refine_steps", [&](const json& v) { c.refine_steps = v.get<std::size_t>(); }},
       {"refine_learning_rate",
        [&](const json& v) { c.refine_learning_rate = v.get<double>(); }}},
      section);
}

json dataset_to_json(const DatasetSource& src) {
  const ToyGaussians& t = src.toy;
  return json{{"format", dataset_format_name(src.format)},
              {"train_images", src.train_images}, {"train_labels", src.train_labels},
              {"validation_images", src.validation_images},
              {"validation_labels", src.validation_labels},
              {"num_classes", src.num_classes}, {"normalize", src.normalize},
              {"classes", t.classes},   {"dim", t.dim},         {"n", t.n},
              {"validation", t.validation}, {"seed", t.seed},   {"spread", t.spread},
              {"mode_spread", t.mode_spread}, {"noise", t.noise}, {"modes", t.modes}};
}

void apply_dataset(const json& obj, DatasetSource& src) {
  ToyGaussians& t = src.toy;
  apply_section(obj,
                {{"format", [&](const json& v) { src.format = parse_dataset_format(v.get<std::string>()); }},
                 {"train_images", [&](const json& v) { src.train_images = v.get<std::string>(); }},
                 {"train_labels", [&](const json& v) { src.train_labels = v.get<std::string>(); }},
                 {"validation_images", [&](const json& v) { src.validation_images = v.get<std::string>(); }},
                 {"validation_labels", [&](const json& v) { src.validation_labels = v.get<std::string>(); }},
                 {"num_classes", [&](const json& v) { src.num_classes = v.get<std::size_t>(); }},
                 {"normalize", [&](const json& v) { src.normalize = v.get<bool>(); }},
                 {"classes", [&](const json& v) { t.classes = v.get<std::size_t>(); }},
                 {"dim", [&](const json& v) { t.dim = v.get<std::size_t>(); }},
                 {"n", [&](const json& v) { t.n = v.get<std::size_t>(); }},
                 {"validation", [&](const json& v) { t.validation = v.get<std::size_t>(); }},
                 {"seed", [&](const json& v) { t.seed = v.get<std::uint64_t>(); }},
                 {"spread", [&](const json& v) { t.spread = v.get<double>(); }},
                 {"mode_spread", [&](const json& v) { t.mode_spread = v.get<double>(); }},
                 {"noise", [&](const json& v) { t.noise = v.get<double>(); }},
                 {"modes", [&](const json& v) { t.modes = v.get<std::size_t>(); }}},
                "dataset");
}

}  // namespace

std::string distill_config_json(const DistillConfig& config) {
  return distill_to_json(config).dump();
}

std::uint64_t config_hash(const DistillConfig& config) {
  return fnv1a64(distill_config_json(config));
}

std::uint64_t config_block_hash(const std::string& json_text) {
  return fnv1a64(parse_text(json_text).dump());
}

DistillConfig distill_config_from_json(const std::string& json_text, DistillConfig base) {
  apply_distill(parse_text(json_text), base, "distill config");
  base.validate();
  return base;
}

ExperimentConfig experiment_config_from_json(const std::string& json_text, ExperimentConfig base) {
  const json root = parse_text(json_text);
  apply_section(
      root,
      {{"arch", [&](const json& v) { base.arch = v.get<std::string>(); }},
       {"width", [&](const json& v) { base.width = v.get<std::size_t>(); }},
       {"temperature", [&](const json& v) { base.temperature = v.get<double>(); }},
       {"dataset", [&](const json& v) { apply_dataset(v, base.dataset); }},
       {"teacher", [&](const json& v) { apply_train(v, base.teacher, "teacher"); }},
       {"student", [&](const json& v) { apply_train(v, base.student, "student"); }},
       {"distill", [&](const json& v) { apply_distill(v, base.distill, "distill"); }}},
      "config");
  base.dataset.toy.validate();
  base.distill.validate();
  if (!(base.temperature > 0.0)) throw InvalidArgument("config: temperature must be positive");
  return base;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  ExperimentConfig config = experiment_config_from_json(read_file(path));
  const std::filesystem::path dir = std::filesystem::path(path).parent_path();
  for (std::string* file : {&config.dataset.train_images, &config.dataset.train_labels,
                            &config.dataset.validation_images, &config.dataset.validation_labels}) {
    if (!file->empty() && std::filesystem::path(*file).is_relative()) *file = (dir / *file).string();
  }
  return config;
}

std::string experiment_config_json(const ExperimentConfig& c) {
  json j{{"arch", c.arch},
         {"width", c.width},
         {"temperature", c.temperature},
         {"dataset", dataset_to_json(c.dataset)},
         {"teacher", train_to_json(c.teacher)},
         {"student", train_to_json(c.student)},
         {"distill", distill_to_json(c.distill)}};
  j["distill"]["threads"] = c.distill.threads;
  return j.dump(2);
}

}  // namespace dwa
