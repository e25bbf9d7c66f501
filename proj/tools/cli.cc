// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.h"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "dwa/binary_io.h"
#include "dwa/bn_objective.h"
#include "dwa/checkpoint.h"
#include "dwa/config.h"
#include "dwa/dwa_solver.h"
#include "dwa/errors.h"
#include "dwa/eval_metrics.h"
#include "dwa/gradcheck.h"
#include "dwa/hash.h"
#include "dwa/manifest.h"
#include "dwa/pipeline.h"
#include "dwa/report.h"
#include "dwa/rng.h"
#include "dwa/stats.h"
#include "dwa/synthesis.h"
#include "dwa/synthetic_io.h"
#include "dwa/training.h"

namespace dwa::cli {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string num(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* app, Common& c, bool out_required) {
  app->add_option("--config", c.config, "experiment config (JSON)")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "seed for this command's random choices");
  CLI::Option* out = app->add_option("--out", c.out, "output path");
  if (out_required) out->required();
}

ExperimentConfig load_config(const Common& c) {
  return c.config.empty() ? ExperimentConfig{} : load_experiment_config(c.config);
}

std::string command_line(const std::vector<std::string>& args) {
  std::string s;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (i > 1) s += ' ';
    s += args[i];
  }
  return s;
}

RunManifest make_manifest(const std::string& command, const ExperimentConfig& config,
                          std::vector<std::uint64_t> seeds, std::uint64_t fingerprint) {
  RunManifest m;
  m.command = command;
  m.config_hash = fnv1a64(experiment_config_json(config));
  m.seeds = std::move(seeds);
  m.tool_version = tool_version();
  m.teacher_fingerprint = fingerprint;
  m.created_at = utc_timestamp();
  return m;
}

void write_manifest(const RunManifest& m, const std::string& path) {
  write_file(path, manifest_to_json(m));
}

ReportFormat format_for(const std::string& path, const std::string& requested) {
  if (requested == "json") return ReportFormat::kJson;
  if (requested == "csv") return ReportFormat::kCsv;
  if (!requested.empty()) throw InvalidArgument("--format must be csv or json");
  return std::filesystem::path(path).extension() == ".json" ? ReportFormat::kJson
                                                            : ReportFormat::kCsv;
}

void check_teacher_fits(const TeacherModel& teacher, const Dataset& data) {
  if (teacher.arch.input_shape != data.train.instance_shape()) {
    throw InvalidArgument("teacher expects instances of shape " +
                          shape_string(teacher.arch.input_shape) + ", dataset has " +
                          shape_string(data.train.instance_shape()));
  }
  if (teacher.arch.num_classes() != data.num_classes) {
    throw InvalidArgument("teacher has " + std::to_string(teacher.arch.num_classes()) +
                          " classes, dataset has " + std::to_string(data.num_classes));
  }
}

// ---- train-teacher ----

struct TrainTeacherArgs {
  Common common;
};

int train_teacher_cmd(const TrainTeacherArgs& a, const std::string& cmd, std::ostream& out) {
  ExperimentConfig config = load_config(a.common);
  if (a.common.seed) config.teacher.seed = *a.common.seed;
  const auto start = Clock::now();
  const Dataset data = load_experiment_dataset(config);
  const TeacherModel teacher = train_experiment_teacher(config, data);
  const double train_seconds = seconds_since(start);
  save_teacher(teacher, a.common.out);

  RunManifest m = make_manifest(cmd, config, {config.teacher.seed, config.dataset.toy.seed},
                                teacher.fingerprint());
  m.timings["train"] = train_seconds;
  write_manifest(m, a.common.out + ".manifest.json");

  out << "teacher " << teacher.arch.name << ": " << teacher.parameter_count() << " parameters\n"
      << "train accuracy " << num(teacher.meta.train_accuracy) << "\n"
      << "validation accuracy " << num(accuracy(teacher, data.validation)) << "\n"
      << "grad norm " << num(teacher.meta.grad_norm) << "\n"
      << "wrote " << a.common.out << "\n";
  return kOk;
}

// ---- distill ----

struct DistillArgs {
  Common common;
  std::string teacher;
  std::optional<std::string> mode;
  std::optional<double> rho;
  std::optional<std::size_t> steps_k;
  std::optional<double> lambda_var;
  std::optional<std::size_t> ipc;
  std::optional<std::size_t> iterations;
  std::optional<std::size_t> threads;
};

void add_distill_overrides(CLI::App* app, DistillArgs& a, bool lambda_var = true) {
  app->add_option("--mode", a.mode, "weight adjustment: dwa, random or none")
      ->check(CLI::IsMember({"dwa", "random", "none"}));
  app->add_option("--rho", a.rho, "adjustment magnitude");
  app->add_option("--steps-k", a.steps_k, "gradient ascent steps per adjustment");
  if (lambda_var) app->add_option("--lambda-var", a.lambda_var, "variance-matching coefficient");
  app->add_option("--ipc", a.ipc, "instances per class");
  app->add_option("--iterations", a.iterations, "synthesis iterations per slot");
  app->add_option("--threads", a.threads, "worker threads");
}

void apply_distill_overrides(const DistillArgs& a, DistillConfig& d) {
  if (a.common.seed) d.seed = *a.common.seed;
  if (a.mode) d.mode = parse_adjustment_mode(*a.mode);
  if (a.rho) d.adjustment.rho = *a.rho;
  if (a.steps_k) d.adjustment.steps_k = *a.steps_k;
  if (a.lambda_var) d.weights.lambda_var = *a.lambda_var;
  if (a.ipc) d.ipc = *a.ipc;
  if (a.iterations) d.iterations = *a.iterations;
  if (a.threads) d.threads = *a.threads;
  d.validate();
}

int distill_cmd(const DistillArgs& a, const std::string& cmd, std::ostream& out) {
  ExperimentConfig config = load_config(a.common);
  apply_distill_overrides(a, config.distill);
  const TeacherModel teacher = load_teacher(a.teacher);
  const Dataset data = load_experiment_dataset(config);
  check_teacher_fits(teacher, data);

  SyntheticSet set = distill(teacher, data.train, config.distill);
  set.manifest.run.command = cmd;
  save_synthetic(set, a.common.out);

  std::vector<double> norms, finals;
  for (const SlotRecord& s : set.manifest.slots) {
    norms.push_back(s.delta_norm);
    finals.push_back(s.final_loss);
  }
  out << "synthesized " << set.size() << " instances (" << config.distill.ipc << " per class, mode "
      << to_string(config.distill.mode) << ")\n"
      << "mean |delta| " << num(mean(norms)) << "\n"
      << "mean final objective " << num(mean(finals)) << "\n";
  for (const auto& [phase, secs] : set.manifest.run.timings) {
    out << phase << " seconds " << num(secs) << "\n";
  }
  out << "wrote " << a.common.out << "\n";
  return kOk;
}

// ---- relabel ----

struct RelabelArgs {
  Common common;
  std::string teacher;
  std::string synthetic;
  std::optional<double> temperature;
};

int relabel_cmd(const RelabelArgs& a, const std::string& cmd, std::ostream& out) {
  const ExperimentConfig config = load_config(a.common);
  const double tau = a.temperature.value_or(config.temperature);
  const TeacherModel teacher = load_teacher(a.teacher);
  SyntheticSet set = load_synthetic(a.synthetic);
  const auto start = Clock::now();
  SoftLabelSet soft = relabel(teacher, set.instances, tau);
  set.soft_labels = std::move(soft.probs);
  set.soft_temperature = tau;
  const double secs = seconds_since(start);
  save_synthetic(set, a.common.out);

  RunManifest m = make_manifest(cmd, config, {}, teacher.fingerprint());
  m.timings["relabel"] = secs;
  write_manifest(m, a.common.out + "/relabel.manifest.json");
  out << "relabeled " << set.size() << " instances at temperature " << num(tau) << "\n"
      << "wrote " << a.common.out << "\n";
  return kOk;
}

// ---- eval ----

struct EvalArgs {
  Common common;
  std::string teacher;
  std::vector<std::string> synthetic;
  std::vector<std::string> variants;
  std::size_t seeds = 1;
  bool hard_labels = false;
  std::string format;
};

int eval_cmd(const EvalArgs& a, const std::string& cmd, std::ostream& out) {
  ExperimentConfig config = load_config(a.common);
  if (a.common.seed) config.student.seed = *a.common.seed;
  if (!a.variants.empty() && a.variants.size() != a.synthetic.size()) {
    throw InvalidArgument("--variant must be given once per --synthetic");
  }
  const TeacherModel teacher = load_teacher(a.teacher);
  const Dataset data = load_experiment_dataset(config);
  check_teacher_fits(teacher, data);

  std::vector<std::pair<std::string, LabeledData>> sets;
  std::vector<MetricRow> rows;
  std::vector<std::uint64_t> seeds;
  for (std::size_t r = 0; r < a.seeds; ++r) seeds.push_back(config.student.seed + r);
  const auto start = Clock::now();
  for (std::size_t v = 0; v < a.synthetic.size(); ++v) {
    const std::string name = a.variants.empty()
                                 ? std::filesystem::path(a.synthetic[v]).filename().string()
                                 : a.variants[v];
    const SyntheticSet set = load_synthetic(a.synthetic[v]);
    std::vector<double> top1;
    for (const std::uint64_t seed : seeds) {
      const StudentScore s =
          evaluate_synthetic(config, teacher, set, data.validation, seed, a.hard_labels);
      rows.push_back({name, seed, "top1", s.top1});
      rows.push_back({name, seed, "top5", s.top5});
      top1.push_back(s.top1);
    }
    out << name << ": top1 " << num(mean(top1)) << " over " << seeds.size() << " student seed(s)\n";
    sets.emplace_back(name, set.labeled());
  }
  const DiversityReport div = diversity_report(sets, teacher);
  for (std::size_t v = 0; v < sets.size(); ++v) {
    double raw = 0.0;
    for (const double d : div.distance[v]) raw += d;
    raw /= static_cast<double>(div.num_classes);
    const std::uint64_t seed = config.student.seed;
    rows.push_back({sets[v].first, seed, "latent_variance", div.latent_variance[v]});
    rows.push_back({sets[v].first, seed, "d_fea", raw});
    rows.push_back({sets[v].first, seed, "d_fea_normalized", div.mean_normalized(v)});
    out << sets[v].first << ": latent variance " << num(div.latent_variance[v]) << ", D_fea "
        << num(raw) << ", normalized D_fea " << num(div.mean_normalized(v)) << "\n";
  }
  if (!a.common.out.empty()) {
    emit_report(rows, format_for(a.common.out, a.format), a.common.out);
    RunManifest m = make_manifest(cmd, config, seeds, teacher.fingerprint());
    m.timings["eval"] = seconds_since(start);
    write_manifest(m, a.common.out + ".manifest.json");
    out << "wrote " << a.common.out << "\n";
  }
  return kOk;
}

// ---- diagnose grad-check ----

struct CheckLine {
  std::string name;
  double max_rel_err = 0.0;
  bool gated = true;
};

constexpr double kGradTolerance = 1e-6;
constexpr double kFdStep = 1e-5;

std::vector<CheckLine> grad_check_suite(std::uint64_t seed, std::size_t configs) {
  Rng rng(seed);
  std::vector<CheckLine> lines;

  // Network-level checks on a small mlp-bn-2 with non-trivial BN parameters
  // and running statistics.
  Model model = build_model(mlp_bn_2(3, 3, 6), mix_seed(seed, 1));
  for (double& p : model.params) p += 0.3 * rng.normal();
  for (BnLayerStats& l : model.running_stats.layers) {
    for (double& m : l.mean) m = 0.5 * rng.normal();
    for (double& v : l.var) v = rng.uniform(0.5, 2.0);
  }
  LabeledData batch;
  std::vector<double> x(5 * 3);
  for (double& v : x) v = rng.normal();
  batch.inputs = Tensor({5, 3}, x);
  batch.labels = {0, 1, 2, 1, 0};
  std::vector<double> dv(model.parameter_count());
  for (double& v : dv) v = 0.05 * rng.normal();
  const WeightDelta delta(dv);

  for (const BnMode mode : {BnMode::kBatch, BnMode::kRunning}) {
    const WeightDelta analytic = grad_wrt_params(model, &delta, batch, mode).grad;
    const Tensor fd = finite_diff_gradient(
        [&](const Tensor& d) {
          const WeightDelta w(d.values());
          return grad_wrt_params(model, &w, batch, mode).loss;
        },
        Tensor::vector(dv), kFdStep);
    lines.push_back({mode == BnMode::kBatch ? "grad_wrt_params (batch BN)"
                                            : "grad_wrt_params (running BN)",
                     relative_error(analytic.values(), fd.values())});
  }
  for (const BnSource source : {BnSource::kSinglePass, BnSource::kLiteralTwoPass}) {
    LossSpec spec{1.0, 0.01, 0.11, source, BnMode::kBatch};
    const InputGradient g = grad_wrt_inputs(model, &delta, batch, spec);
    const Tensor fd = finite_diff_gradient(
        [&](const Tensor& in) {
          return grad_wrt_inputs(model, &delta, LabeledData{in, batch.labels}, spec).loss;
        },
        batch.inputs, kFdStep);
    lines.push_back({source == BnSource::kSinglePass ? "grad_wrt_inputs (single pass)"
                                                     : "grad_wrt_inputs (two pass)",
                     relative_error(g.grad.values(), fd.values())});
  }

  // Per-channel squared-form gradients over random (S, T) configurations.
  CheckLine mean_line{"analytic_mean_grad", 0.0};
  CheckLine var_line{"analytic_var_grad", 0.0, false};
  CheckLine exact_line{"exact_var_grad", 0.0};
  for (std::size_t c = 0; c < configs; ++c) {
    const std::size_t n = 2 + rng.index(15);
    std::vector<double> s(n);
    const double loc = rng.normal();
    const double scale = rng.uniform(0.2, 3.0);
    for (double& v : s) v = loc + scale * rng.normal();
    const double tm = rng.normal();
    const double tv = rng.uniform(0.1, 4.0);
    std::vector<double> am(n), av(n), ae(n);
    for (std::size_t i = 0; i < n; ++i) {
      am[i] = analytic_mean_grad(s, tm, i);
      av[i] = analytic_var_grad(s, tv, i);
      ae[i] = exact_var_grad(s, tv, i);
    }
    const Tensor point = Tensor::vector(s);
    const Tensor fm = finite_diff_gradient(
        [&](const Tensor& p) { return squared_mean_gap(p.values(), tm); }, point, kFdStep);
    const Tensor fv = finite_diff_gradient(
        [&](const Tensor& p) { return squared_var_gap(p.values(), tv); }, point, kFdStep);
    mean_line.max_rel_err = std::max(mean_line.max_rel_err, relative_error(am, fm.values()));
    var_line.max_rel_err = std::max(var_line.max_rel_err, relative_error(av, fv.values()));
    exact_line.max_rel_err = std::max(exact_line.max_rel_err, relative_error(ae, fv.values()));
  }
  lines.push_back(mean_line);
  lines.push_back(var_line);
  lines.push_back(exact_line);
  return lines;
}

struct DiagnoseArgs {
  Common common;
  std::string teacher;
  std::string synthetic;
  std::size_t trials = 20;
  std::size_t configs = 100;
  std::optional<double> rho;
  std::optional<std::size_t> steps_k;
  std::string format;
};

void emit_if_requested(const DiagnoseArgs& a, const std::vector<MetricRow>& rows,
                       RunManifest m, std::ostream& out) {
  if (a.common.out.empty()) return;
  emit_report(rows, format_for(a.common.out, a.format), a.common.out);
  write_manifest(m, a.common.out + ".manifest.json");
  out << "wrote " << a.common.out << "\n";
}

int grad_check_cmd(const DiagnoseArgs& a, const std::string& cmd, std::ostream& out) {
  const ExperimentConfig config = load_config(a.common);
  const std::uint64_t seed = a.common.seed.value_or(0);
  const auto start = Clock::now();
  const std::vector<CheckLine> lines = grad_check_suite(seed, a.configs);
  bool ok = true;
  double gated_max = 0.0;
  std::vector<MetricRow> rows;
  for (const CheckLine& l : lines) {
    const bool pass = l.max_rel_err <= kGradTolerance;
    out << l.name << ": max relative error " << num(l.max_rel_err)
        << (pass ? "" : l.gated ? "  FAIL" : "  (literal formula, not gated)") << "\n";
    if (l.gated) {
      ok = ok && pass;
      gated_max = std::max(gated_max, l.max_rel_err);
    }
    rows.push_back({l.name, seed, "max_rel_err", l.max_rel_err});
  }
  out << "max relative error " << num(gated_max) << " (tolerance " << num(kGradTolerance) << ")\n";
  RunManifest m = make_manifest(cmd, config, {seed}, 0);
  m.timings["grad_check"] = seconds_since(start);
  emit_if_requested(a, rows, m, out);
  return ok ? kOk : kNumericError;
}

int contradiction_cmd(const DiagnoseArgs& a, const std::string& cmd, std::ostream& out) {
  const ExperimentConfig config = load_config(a.common);
  const std::uint64_t seed = a.common.seed.value_or(0);
  const TeacherModel teacher = load_teacher(a.teacher);
  Tensor batch;
  if (!a.synthetic.empty()) {
    batch = load_synthetic(a.synthetic).instances;
  } else {
    const Dataset data = load_experiment_dataset(config);
    check_teacher_fits(teacher, data);
    std::vector<int> classes(data.num_classes);
    for (std::size_t c = 0; c < classes.size(); ++c) classes[c] = static_cast<int>(c);
    batch = init_batch(data.train, classes, seed).inputs;
  }
  const auto start = Clock::now();
  const std::vector<ChannelContradiction> scan = contradiction_scan(teacher, batch);
  std::map<std::size_t, std::pair<std::size_t, std::size_t>> per_layer;  // contradictory, total
  double identity_err = 0.0;
  for (const ChannelContradiction& c : scan) {
    auto& [bad, total] = per_layer[c.layer];
    bad += c.report.contradictory_count();
    total += c.report.entries.size();
    for (const ContradictionEntry& e : c.report.entries) {
      const double scale = std::max({std::abs(e.product), std::abs(e.closed_form), 1e-300});
      identity_err = std::max(identity_err, std::abs(e.product - e.closed_form) / scale);
    }
  }
  std::vector<MetricRow> rows;
  for (const auto& [layer, counts] : per_layer) {
    const double frac = static_cast<double>(counts.first) / static_cast<double>(counts.second);
    out << "bn layer " << layer << ": " << counts.first << " of " << counts.second
        << " instance-channel entries contradictory (" << num(frac) << ")\n";
    rows.push_back({"layer" + std::to_string(layer), seed, "contradictory_fraction", frac});
  }
  out << "closed-form identity max relative error " << num(identity_err) << "\n";
  rows.push_back({"all", seed, "identity_max_rel_err", identity_err});
  RunManifest m = make_manifest(cmd, config, {seed}, teacher.fingerprint());
  m.timings["contradiction"] = seconds_since(start);
  emit_if_requested(a, rows, m, out);
  return kOk;
}

int direction_cmd(const DiagnoseArgs& a, const std::string& cmd, std::ostream& out) {
  ExperimentConfig config = load_config(a.common);
  if (a.rho) config.distill.adjustment.rho = *a.rho;
  if (a.steps_k) config.distill.adjustment.steps_k = *a.steps_k;
  config.distill.adjustment.validate();
  const std::uint64_t base = a.common.seed.value_or(1000);
  const TeacherModel teacher = load_teacher(a.teacher);
  const Dataset data = load_experiment_dataset(config);
  check_teacher_fits(teacher, data);

  const auto start = Clock::now();
  std::size_t increased = 0, flat = 0;
  std::vector<double> directed, random;
  std::vector<MetricRow> rows;
  std::vector<std::uint64_t> seeds;
  for (std::size_t t = 0; t < a.trials; ++t) {
    const std::uint64_t seed = base + t;
    seeds.push_back(seed);
    const DirectionTrial trial =
        direction_trial(teacher, data.train, config.distill.adjustment, seed);
    increased += trial.directed.claim_batch_increase;
    flat += trial.directed.claim_holdout_flat;
    directed.push_back(trial.directed.holdout_change());
    random.push_back(trial.random.holdout_change());
    rows.push_back({"directed", seed, "batch_change", trial.directed.batch_change()});
    rows.push_back({"directed", seed, "holdout_change", trial.directed.holdout_change()});
    rows.push_back({"random", seed, "batch_change", trial.random.batch_change()});
    rows.push_back({"random", seed, "holdout_change", trial.random.holdout_change()});
  }
  const double n = static_cast<double>(a.trials);
  out << "teacher grad norm " << num(teacher.meta.grad_norm) << "\n"
      << "batch loss increased in " << increased << " of " << a.trials << " trials ("
      << num(increased / n) << ")\n"
      << "holdout loss flat in " << flat << " of " << a.trials << " trials (" << num(flat / n)
      << ")\n"
      << "mean holdout change: directed " << num(mean(directed)) << ", random "
      << num(mean(random)) << "\n";
  if (a.trials >= 2) {
    const PairedTest pt = paired_t_greater(random, directed);
    out << "directed < random one-sided paired p " << num(pt.p_value) << "\n";
  }
  RunManifest m = make_manifest(cmd, config, seeds, teacher.fingerprint());
  m.timings["direction"] = seconds_since(start);
  emit_if_requested(a, rows, m, out);
  return kOk;
}

// ---- sweep ----

struct SweepArgs {
  DistillArgs distill;
  std::string range;
  std::size_t repeats = 1;
  bool coupled = false;
};

std::vector<double> parse_range(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  auto parse = [&](const std::string& s) {
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
      throw InvalidArgument("--lambda-var expects start:stop:count, got '" + text + "'");
    }
    return v;
  };
  if (parts.size() != 3) throw InvalidArgument("--lambda-var expects start:stop:count, got '" + text + "'");
  const double lo = parse(parts[0]);
  const double hi = parse(parts[1]);
  const double count = parse(parts[2]);
  if (!(count >= 1.0) || count != std::floor(count)) {
    throw InvalidArgument("--lambda-var count must be a positive integer");
  }
  const std::size_t n = static_cast<std::size_t>(count);
  std::vector<double> out(n, lo);
  for (std::size_t i = 1; i < n; ++i) {
    out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return out;
}

int sweep_cmd(const SweepArgs& a, const std::string& cmd, std::ostream& out) {
  if (a.repeats == 0) throw InvalidArgument("--repeats must be positive");
  const std::vector<double> grid = parse_range(a.range);
  ExperimentConfig config = load_config(a.distill.common);
  apply_distill_overrides(a.distill, config.distill);
  const TeacherModel teacher = load_teacher(a.distill.teacher);
  const Dataset data = load_experiment_dataset(config);
  check_teacher_fits(teacher, data);

  const auto start = Clock::now();
  // [repeat][grid point]
  std::vector<std::vector<double>> acc(a.repeats, std::vector<double>(grid.size()));
  std::vector<std::vector<double>> dfea(a.repeats, std::vector<double>(grid.size()));
  std::vector<std::uint64_t> seeds;
  for (std::size_t r = 0; r < a.repeats; ++r) {
    DistillConfig d = config.distill;
    d.seed = config.distill.seed + r;
    seeds.push_back(d.seed);
    std::vector<std::pair<std::string, LabeledData>> sets;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      d.weights.lambda_var = grid[i];
      if (a.coupled) d.weights.lambda_mean = grid[i];
      const SyntheticSet set = distill(teacher, data.train, d);
      acc[r][i] = evaluate_synthetic(config, teacher, set, data.validation,
                                     config.student.seed + r).top1;
      sets.emplace_back(num(grid[i]), set.labeled());
    }
    const DiversityReport div = diversity_report(sets, teacher);
    for (std::size_t i = 0; i < grid.size(); ++i) dfea[r][i] = div.mean_normalized(i);
  }

  std::string csv = "lambda_var,accuracy,d_fea\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double ma = 0.0, md = 0.0;
    for (std::size_t r = 0; r < a.repeats; ++r) {
      ma += acc[r][i];
      md += dfea[r][i];
    }
    ma /= static_cast<double>(a.repeats);
    md /= static_cast<double>(a.repeats);
    csv += num(grid[i]) + "," + num(ma) + "," + num(md) + "\n";
    out << "run " << i + 1 << "/" << grid.size() << ": lambda_var " << num(grid[i])
        << " accuracy " << num(ma) << " d_fea " << num(md) << "\n";
  }
  write_file(a.distill.common.out, csv);
  RunManifest m = make_manifest(cmd, config, seeds, teacher.fingerprint());
  m.timings["sweep"] = seconds_since(start);
  write_manifest(m, a.distill.common.out + ".manifest.json");
  out << "wrote " << a.distill.common.out << "\n";
  return kOk;
}

// ---- report ----

struct ReportArgs {
  Common common;
  std::vector<std::string> inputs;
  std::string format;
};

int report_cmd(const ReportArgs& a, const std::string& cmd, std::ostream& out) {
  const ExperimentConfig config = load_config(a.common);
  std::vector<MetricRow> rows;
  for (const std::string& path : a.inputs) {
    const std::string text = read_file(path);
    std::vector<MetricRow> part = std::filesystem::path(path).extension() == ".json"
                                      ? parse_report_json(text)
                                      : parse_report_csv(text);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  emit_report(rows, format_for(a.common.out, a.format), a.common.out);

  std::map<std::pair<std::string, std::string>, std::vector<double>> groups;
  for (const MetricRow& r : rows) groups[{r.variant, r.metric}].push_back(r.value);
  for (const auto& [key, values] : groups) {
    out << key.first << " " << key.second << ": n " << values.size() << " mean "
        << num(mean(values)) << "\n";
  }
  RunManifest m = make_manifest(cmd, config, {a.common.seed.value_or(0)}, 0);
  write_manifest(m, a.common.out + ".manifest.json");
  out << "wrote " << a.common.out << " (" << rows.size() << " rows)\n";
  return kOk;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const NumericError*>(&e)) return kNumericError;
  if (dynamic_cast<const InvalidArgument*>(&e)) return kUsage;
  return kDataError;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dataset distillation with directed weight adjustment", "dwa"};
  app.require_subcommand(1);

  TrainTeacherArgs train_args;
  CLI::App* train = app.add_subcommand("train-teacher", "train a teacher on the configured dataset");
  add_common(train, train_args.common, true);

  DistillArgs distill_args;
  CLI::App* dist = app.add_subcommand("distill", "synthesize a distilled set from a teacher");
  add_common(dist, distill_args.common, true);
  dist->add_option("--teacher", distill_args.teacher, "teacher checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  add_distill_overrides(dist, distill_args);

  RelabelArgs relabel_args;
  CLI::App* rel = app.add_subcommand("relabel", "attach teacher soft labels to a synthetic set");
  add_common(rel, relabel_args.common, true);
  rel->add_option("--teacher", relabel_args.teacher, "teacher checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  rel->add_option("--synthetic", relabel_args.synthetic, "synthetic set directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  rel->add_option("--temperature", relabel_args.temperature, "softmax temperature");

  EvalArgs eval_args;
  CLI::App* ev = app.add_subcommand("eval", "train students on synthetic sets and score them");
  add_common(ev, eval_args.common, false);
  ev->add_option("--teacher", eval_args.teacher, "teacher checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  ev->add_option("--synthetic", eval_args.synthetic, "synthetic set directory (repeatable)")
      ->required()
      ->check(CLI::ExistingDirectory);
  ev->add_option("--variant", eval_args.variants, "report name for each --synthetic");
  ev->add_option("--seeds", eval_args.seeds, "student seeds per set")->check(CLI::PositiveNumber);
  ev->add_flag("--hard-labels", eval_args.hard_labels, "train students on hard labels");
  ev->add_option("--format", eval_args.format, "report format (csv or json)");

  DiagnoseArgs diag_args;
  CLI::App* diag = app.add_subcommand("diagnose", "gradient, contradiction and direction checks");
  diag->require_subcommand(1);
  CLI::App* gc = diag->add_subcommand("grad-check", "finite-difference gradient suite");
  add_common(gc, diag_args.common, false);
  gc->add_option("--configs", diag_args.configs, "random per-channel configurations")
      ->check(CLI::PositiveNumber);
  gc->add_option("--format", diag_args.format, "report format (csv or json)");
  CLI::App* con = diag->add_subcommand("contradiction", "mean/variance gradient sign scan");
  add_common(con, diag_args.common, false);
  con->add_option("--teacher", diag_args.teacher, "teacher checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  con->add_option("--synthetic", diag_args.synthetic, "scan this synthetic set instead")
      ->check(CLI::ExistingDirectory);
  con->add_option("--format", diag_args.format, "report format (csv or json)");
  CLI::App* dir = diag->add_subcommand("direction", "verify the adjustment direction");
  add_common(dir, diag_args.common, false);
  dir->add_option("--teacher", diag_args.teacher, "teacher checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  dir->add_option("--trials", diag_args.trials, "number of batches")->check(CLI::PositiveNumber);
  dir->add_option("--rho", diag_args.rho, "adjustment magnitude");
  dir->add_option("--steps-k", diag_args.steps_k, "gradient ascent steps");
  dir->add_option("--format", diag_args.format, "report format (csv or json)");

  SweepArgs sweep_args;
  CLI::App* sw = app.add_subcommand("sweep", "distill and evaluate over a lambda_var grid");
  add_common(sw, sweep_args.distill.common, true);
  sw->add_option("--teacher", sweep_args.distill.teacher, "teacher checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  add_distill_overrides(sw, sweep_args.distill, false);
  sw->add_option("--lambda-var", sweep_args.range, "grid start:stop:count")->required();
  sw->add_option("--repeats", sweep_args.repeats, "seeds averaged per grid point")
      ->check(CLI::PositiveNumber);
  sw->add_flag("--coupled", sweep_args.coupled, "tie the mean coefficient to lambda_var");

  ReportArgs report_args;
  CLI::App* rep = app.add_subcommand("report", "merge and convert metric reports");
  add_common(rep, report_args.common, true);
  rep->add_option("--in", report_args.inputs, "CSV or JSON report (repeatable)")
      ->required()
      ->check(CLI::ExistingFile);
  rep->add_option("--format", report_args.format, "output format (csv or json)");

  std::vector<const char*> argv;
  for (const std::string& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kUsage;
  }

  const std::string cmd = command_line(args);
  try {
    if (train->parsed()) return train_teacher_cmd(train_args, cmd, out);
    if (dist->parsed()) return distill_cmd(distill_args, cmd, out);
    if (rel->parsed()) return relabel_cmd(relabel_args, cmd, out);
    if (ev->parsed()) return eval_cmd(eval_args, cmd, out);
    if (gc->parsed()) return grad_check_cmd(diag_args, cmd, out);
    if (con->parsed()) return contradiction_cmd(diag_args, cmd, out);
    if (dir->parsed()) return direction_cmd(diag_args, cmd, out);
    if (sw->parsed()) return sweep_cmd(sweep_args, cmd, out);
    if (rep->parsed()) return report_cmd(report_args, cmd, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  err << app.help();
  return kUsage;
}

}  // namespace dwa::cli
