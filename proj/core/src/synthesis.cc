// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#include "dwa/synthesis.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "dwa/config.h"
#include "dwa/errors.h"
#include "dwa/optim.h"
#include "dwa/rng.h"
#include "parallel.h"

namespace dwa {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double v) { return std::isfinite(v); });
}

[[noreturn]] void rethrow_for_slot(std::exception_ptr error, std::size_t slot) {
  const std::string where = "slot " + std::to_string(slot) + ": ";
  try {
    std::rethrow_exception(error);
  } catch (const SynthesisError& e) {
    throw SynthesisError(where + e.detail(), e.step(), e.last_finite());
  } catch (const NumericError& e) {
    throw NumericError(where + e.detail(), e.step());
  } catch (const ShapeError& e) {
    throw ShapeError(e.op(), where + e.what());
  } catch (const DataError& e) {
    throw DataError(where + e.what());
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(where + e.what());
  }
}

void rethrow_first(const std::vector<std::exception_ptr>& errors) {
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (errors[i]) rethrow_for_slot(errors[i], i);
  }
}

const char* gradient_mode_name(GradientMode m) {
  return m == GradientMode::kRaw ? "raw" : "unit_normalized";
}

const char* bn_source_name(BnSource s) {
  return s == BnSource::kSinglePass ? "single_pass" : "literal_two_pass";
}

}  // namespace

std::string to_string(AdjustmentMode mode) {
  switch (mode) {
    case AdjustmentMode::kDwa:
      return "dwa";
    case AdjustmentMode::kRandom:
      return "random";
    case AdjustmentMode::kNone:
      return "none";
  }
  return "none";
}

AdjustmentMode parse_adjustment_mode(const std::string& text) {
  if (text == "dwa") return AdjustmentMode::kDwa;
  if (text == "random") return AdjustmentMode::kRandom;
  if (text == "none") return AdjustmentMode::kNone;
  throw InvalidArgument("unknown adjustment mode '" + text + "' (expected dwa, random or none)");
}

void DistillConfig::validate() const {
  if (ipc == 0) throw InvalidArgument("distill: ipc must be positive");
  if (!std::isfinite(learning_rate) || learning_rate <= 0.0) {
    throw InvalidArgument("distill: learning rate must be positive");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw InvalidArgument("distill: betas must lie in [0, 1)");
  }
  if (!std::isfinite(random_sigma) || random_sigma < 0.0) {
    throw InvalidArgument("distill: sigma_theta must be finite and non-negative");
  }
  weights.validate();
  adjustment.validate();
}

LabeledData init_batch(const LabeledData& data, std::span<const int> classes, std::uint64_t seed) {
  return data.subset(init_rows(data, classes, seed));
}

std::vector<std::size_t> init_rows(const LabeledData& data, std::span<const int> classes,
                                   std::uint64_t seed) {
  if (classes.empty()) throw InvalidArgument("init_batch: empty class list");
  Rng rng(seed);
  std::vector<std::size_t> rows;
  rows.reserve(classes.size());
  std::vector<std::size_t> candidates;
  for (int c : classes) {
    candidates.clear();
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data.labels[i] == c) candidates.push_back(i);
    }
    if (candidates.empty()) {
      throw InvalidArgument("init_batch: class " + std::to_string(c) + " has no instances");
    }
    rows.push_back(candidates[rng.index(candidates.size())]);
  }
  return rows;
}

BatchResult synthesize_batch(const TeacherModel& teacher, const WeightDelta& delta,
                             const LabeledData& init, const DistillConfig& config) {
  config.validate();
  if (init.size() == 0) throw InvalidArgument("synthesize_batch: empty batch");
  init.validate(teacher.arch.num_classes());
  if (!init.inputs.all_finite()) throw InvalidArgument("synthesize_batch: non-finite batch");

  const LossSpec spec = recovery_spec(config.weights, config.bn_source, config.bn_mode);
  BatchResult result{init, {}};
  if (config.iterations == 0) return result;

  LabeledData last_finite = init;
  std::span<double> x = result.batch.inputs.data();
  Adam adam(x.size(), AdamConfig{config.beta1, config.beta2, 1e-8, 0.0});
  result.losses.reserve(config.iterations + 1);
  for (std::size_t t = 0; t <= config.iterations; ++t) {
    const InputGradient g = grad_wrt_inputs(teacher, &delta, result.batch, spec);
    if (!std::isfinite(g.loss) || !all_finite(g.grad.data())) {
      throw SynthesisError("synthesize_batch: non-finite objective", t, std::move(last_finite));
    }
    result.losses.push_back(g.loss);
    if (t == config.iterations) break;
    std::copy(x.begin(), x.end(), last_finite.inputs.data().begin());
    adam.step(x, g.grad.data(), cosine_lr(config.learning_rate, t, config.iterations));
  }
  return result;
}

SyntheticSet distill(const TeacherModel& teacher, const LabeledData& train,
                     const DistillConfig& config) {
  const auto start = Clock::now();
  config.validate();
  const std::size_t classes = teacher.arch.num_classes();
  train.validate(classes);
  std::vector<int> class_list(classes);
  for (std::size_t c = 0; c < classes; ++c) class_list[c] = static_cast<int>(c);

  const std::size_t slots = config.ipc;
  std::vector<LabeledData> inits(slots);
  std::vector<WeightDelta> deltas(slots);
  std::vector<SlotRecord> records(slots);
  std::vector<BatchResult> batches(slots);
  const bool directed = config.mode == AdjustmentMode::kDwa ||
                        (config.mode == AdjustmentMode::kRandom && config.random_sigma == 0.0);

  rethrow_first(detail::parallel_for(slots, config.threads, [&](std::size_t i) {
    records[i].seed = mix_seed(config.seed, i);
    inits[i] = init_batch(train, class_list, records[i].seed);
    const auto t0 = Clock::now();
    if (directed) {
      deltas[i] = solve_adjustment(teacher, inits[i], config.adjustment);
    } else if (config.mode == AdjustmentMode::kRandom) {
      deltas[i] = random_adjustment(teacher, config.random_sigma,
                                    mix_seed(records[i].seed, config.adjustment.seed + 1));
    } else {
      deltas[i] = WeightDelta::zeros(teacher.parameter_count());
    }
    records[i].adjust_seconds = seconds_since(t0);
  }));

  double sigma = 0.0;
  if (config.mode == AdjustmentMode::kRandom) {
    sigma = config.random_sigma;
    if (sigma == 0.0) {
      std::vector<double> norms;
      for (const WeightDelta& d : deltas) norms.push_back(d.norm());
      std::sort(norms.begin(), norms.end());
      const std::size_t m = norms.size();
      const double median = m % 2 == 1 ? norms[m / 2] : 0.5 * (norms[m / 2 - 1] + norms[m / 2]);
      sigma = median / std::sqrt(static_cast<double>(teacher.parameter_count()));
      for (std::size_t i = 0; i < slots; ++i) {
        const auto t0 = Clock::now();
        deltas[i] = sigma > 0.0 ? random_adjustment(teacher, sigma,
                                                    mix_seed(records[i].seed,
                                                             config.adjustment.seed + 1))
                                : WeightDelta::zeros(teacher.parameter_count());
        records[i].adjust_seconds += seconds_since(t0);
      }
    }
  }

  rethrow_first(detail::parallel_for(slots, config.threads, [&](std::size_t i) {
    const auto t0 = Clock::now();
    batches[i] = synthesize_batch(teacher, deltas[i], inits[i], config);
    records[i].synth_seconds = seconds_since(t0);
    records[i].delta_norm = deltas[i].norm();
    if (!batches[i].losses.empty()) {
      records[i].initial_loss = batches[i].losses.front();
      records[i].final_loss = batches[i].losses.back();
    }
  }));

  SyntheticSet set;
  std::vector<Tensor> parts;
  parts.reserve(slots);
  for (std::size_t i = 0; i < slots; ++i) {
    parts.push_back(batches[i].batch.inputs);
    set.labels.insert(set.labels.end(), batches[i].batch.labels.begin(),
                      batches[i].batch.labels.end());
  }
  set.instances = Tensor::concat_rows(parts);

  SynthesisManifest& m = set.manifest;
  m.ipc = config.ipc;
  m.num_classes = classes;
  m.mode = to_string(config.mode);
  m.gradient_mode = gradient_mode_name(config.adjustment.gradient_mode);
  m.bn_source = bn_source_name(config.bn_source);
  m.random_sigma = sigma;
  m.slots = records;
  m.config_json = distill_config_json(config);
  m.run.command = "distill";
  m.run.config_hash = config_hash(config);
  m.run.seeds = {config.seed};
  m.run.tool_version = tool_version();
  m.run.teacher_fingerprint = teacher.fingerprint();
  double adjust = 0.0, synth = 0.0;
  for (const SlotRecord& r : records) {
    adjust += r.adjust_seconds;
    synth += r.synth_seconds;
  }
  m.run.timings = {{"adjustment", adjust}, {"synthesis", synth}, {"total", seconds_since(start)}};
  m.run.created_at = utc_timestamp();
  return set;
}

LatentVariance feature_variance(const Tensor& features, std::span<const int> labels,
                                std::size_t num_classes) {
  if (features.rank() == 0 || features.dim(0) == 0) {
    throw InvalidArgument("latent_variance: empty feature set");
  }
  const std::size_t n = features.dim(0);
  if (labels.size() != n) throw ShapeError("latent_variance", "label count differs from rows");
  const std::size_t d = features.size() / n;
  std::span<const double> f = features.data();

  auto column_variance = [&](const std::vector<std::size_t>& rows, std::size_t j) {
    const double pivot = f[rows.front() * d + j];
    double mean = 0.0;
    for (std::size_t r : rows) mean += f[r * d + j] - pivot;
    mean = pivot + mean / static_cast<double>(rows.size());
    double var = 0.0;
    for (std::size_t r : rows) var += (f[r * d + j] - mean) * (f[r * d + j] - mean);
    return var / static_cast<double>(rows.size());
  };

  LatentVariance out;
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  out.per_dim.resize(d);
  for (std::size_t j = 0; j < d; ++j) out.per_dim[j] = column_variance(all, j);
  for (double v : out.per_dim) out.overall += v;
  out.overall /= static_cast<double>(d);

  out.per_class.assign(num_classes, 0.0);
  out.class_counts.assign(num_classes, 0);
  for (std::size_t c = 0; c < num_classes; ++c) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i] == static_cast<int>(c)) rows.push_back(i);
    }
    out.class_counts[c] = rows.size();
    if (rows.empty()) continue;
    double total = 0.0;
    for (std::size_t j = 0; j < d; ++j) total += column_variance(rows, j);
    out.per_class[c] = total / static_cast<double>(d);
  }
  return out;
}

LatentVariance latent_variance(const LabeledData& data, const TeacherModel& teacher) {
  if (data.size() == 0) throw InvalidArgument("latent_variance: empty set");
  const ForwardResult out = forward(teacher, data.inputs, nullptr, BnMode::kRunning);
  return feature_variance(out.features, data.labels, teacher.arch.num_classes());
}

LatentVariance latent_variance(const SyntheticSet& set, const TeacherModel& teacher) {
  return latent_variance(set.labeled(), teacher);
}

}  // namespace dwa
