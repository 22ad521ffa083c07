// Copyright 2026 The lsapcvae Authors
// SPDX-License-Identifier: Apache-2.0

// lsapcvae: dataset generation, CVAE training, evaluation, single-instance
// solving, latency benchmarks and latent export.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lsap/checkpoint.hpp"
#include "lsap/cvae.hpp"
#include "lsap/d2d.hpp"
#include "lsap/dataset.hpp"
#include "lsap/eval.hpp"
#include "lsap/hungarian.hpp"
#include "lsap/train.hpp"

namespace {

using namespace lsap;

constexpr double kTrainFraction = 0.9;

struct Options {
  int n = 4;
  int m = -1;  // -1: ceil(3n/4)
  std::size_t count = 0;
  std::uint64_t seed = 1;
  std::string arch = "hybrid";
  std::string preset = "desk";
  int epochs = 150;
  std::size_t batch = 128;
  double lr = 1e-3;
  std::string lr_schedule = "constant";
  double kl_weight = 1.0;
  std::string dataset;
  std::string checkpoint;
  std::string out;
  std::string solver = "hungarian";
  std::string z_mode = "mean";
  std::string matrix;
  bool augment = false;
};

// Seeds derived from --seed for the independent streams of a training run.
std::uint64_t init_seed(std::uint64_t seed) { return seed; }
std::uint64_t stream_seed(std::uint64_t seed) { return seed + 1; }
std::uint64_t split_seed(std::uint64_t seed) { return seed + 2; }

d2d::ScenarioConfig scenario(const Options& o) {
  if (o.n < 1) throw InvalidInputError("--n must be >= 1");
  auto cfg = d2d::ScenarioConfig::with_order(o.n);
  if (o.m >= 0) cfg.m_d2d = o.m;
  cfg.validate();
  return cfg;
}

void print_resolved(const std::string& command, const std::vector<std::pair<std::string, std::string>>& kv) {
  std::cout << "# lsapcvae " << command << '\n';
  for (const auto& [k, v] : kv) std::cout << "# " << k << " = " << v << '\n';
}

template <typename V>
std::string str(const V& v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

void print_scenario(const d2d::ScenarioConfig& cfg) {
  std::istringstream lines(d2d::to_string(cfg));
  std::string line;
  while (std::getline(lines, line)) std::cout << "# scenario." << line << '\n';
}

CostMatrix read_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open matrix file " + path);
  long long n = 0;
  if (!(in >> n) || n < 1) throw FormatError(path + ": first token must be the order n >= 1");
  std::vector<double> values(static_cast<std::size_t>(n * n));
  for (double& v : values) {
    if (!(in >> v)) throw FormatError(path + ": expected " + std::to_string(n * n) + " matrix entries");
  }
  std::string extra;
  if (in >> extra) throw FormatError(path + ": unexpected trailing token '" + extra + "'");
  CostMatrix cost(static_cast<std::size_t>(n), std::move(values));
  cost.require_finite();
  return cost;
}

std::string perm_string(const Permutation& p) {
  std::string s = "[";
  for (std::size_t k = 0; k < p.size(); ++k) s += (k ? " " : "") + std::to_string(p[k]);
  return s + "]";
}

int cmd_generate(const Options& o) {
  if (o.count < 1) throw InvalidInputError("--count must be >= 1");
  if (o.out.empty()) throw InvalidInputError("--out is required");
  const auto cfg = scenario(o);
  print_resolved("generate", {{"n", str(o.n)}, {"m", str(cfg.m_d2d)}, {"count", str(o.count)},
                              {"seed", str(o.seed)}, {"out", o.out}});
  print_scenario(cfg);
  const auto summary = generate_dataset(cfg, o.count, o.seed, o.out);
  std::cout << "wrote " << summary.count << " samples to " << o.out << " (scenario in " << o.out
            << ".cfg)\n";
  std::cout << "mean optimal sum rate: " << std::setprecision(6) << -summary.mean_optimal_cost
            << " Mbit/s\n";
  return 0;
}

// Scenario a dataset was generated with: its .cfg sidecar if present, else
// the defaults for its order.
d2d::ScenarioConfig dataset_scenario(const std::string& dataset, std::size_t n) {
  std::ifstream in(dataset + ".cfg");
  if (!in) return d2d::ScenarioConfig::with_order(static_cast<int>(n));
  auto cfg = d2d::read_config(in);
  if (static_cast<std::size_t>(cfg.n_cu) != n) throw FormatError(dataset + ".cfg does not match the dataset order");
  return cfg;
}

int cmd_train(const Options& o) {
  if (o.dataset.empty()) throw InvalidInputError("--dataset is required");
  if (o.checkpoint.empty()) throw InvalidInputError("--checkpoint is required");
  cvae::TrainConfig tc;
  tc.epochs = o.epochs;
  tc.batch_size = o.batch;
  tc.lr = o.lr;
  tc.lr_schedule = cvae::parse_lr_schedule(o.lr_schedule);
  tc.kl_weight = o.kl_weight;
  tc.seed = stream_seed(o.seed);
  tc.test_z_mode = cvae::parse_z_mode(o.z_mode);
  tc.validate();
  const auto arch = cvae::parse_arch(o.arch);
  const auto preset = cvae::parse_preset(o.preset);

  const DatasetFile file = load_dataset(o.dataset);
  const std::size_t n = file.header.order;
  const auto mc = cvae::make_config(arch, n, preset);
  if (o.augment) tc.augment_rows = static_cast<std::size_t>(dataset_scenario(o.dataset, n).m_d2d);
  const std::string history = o.out.empty() ? o.checkpoint + ".history.csv" : o.out;
  print_resolved("train", {{"dataset", o.dataset}, {"dataset_seed", str(file.header.scenario_seed)},
                           {"n", str(n)}, {"arch", o.arch}, {"preset", o.preset},
                           {"epochs", str(tc.epochs)}, {"batch", str(tc.batch_size)},
                           {"lr", str(tc.lr)}, {"lr_schedule", o.lr_schedule}, {"kl_weight", str(tc.kl_weight)},
                           {"augment_rows", str(tc.augment_rows)},
                           {"z_mode", o.z_mode}, {"seed", str(o.seed)},
                           {"init_seed", str(init_seed(o.seed))}, {"train_seed", str(tc.seed)},
                           {"split_seed", str(split_seed(o.seed))},
                           {"train_fraction", str(kTrainFraction)},
                           {"parameters", str(cvae::parameter_count(mc))},
                           {"checkpoint", o.checkpoint}, {"history", history}});

  const Split split = split_dataset(file.samples, kTrainFraction, split_seed(o.seed));
  cvae::CvaeModel<float> model(mc);
  model.init(init_seed(o.seed));
  const auto result = cvae::train(
      model, split.train, tc, split.test, [](const cvae::EpochStats& s, const cvae::CvaeModel<float>&) {
        std::cout << "epoch " << s.epoch << "  recon " << std::setprecision(6) << s.recon << "  kl "
                  << s.kl << "  total " << s.total << "  heldout " << std::setprecision(4)
                  << s.heldout_accuracy << "%" << std::endl;
      });

  cvae::CheckpointMeta meta;
  meta.preset = preset;
  meta.init_seed = init_seed(o.seed);
  meta.epoch = tc.epochs;
  meta.dataset = o.dataset;
  meta.dataset_seed = file.header.scenario_seed;
  meta.split_seed = split_seed(o.seed);
  meta.train_fraction = kTrainFraction;
  meta.train = tc;
  cvae::save_checkpoint(o.checkpoint, model, meta);
  {
    std::ofstream csv(history, std::ios::trunc);
    if (!csv) throw Error("cannot write " + history);
    cvae::write_history_csv(csv, result.history,
                            "arch=" + o.arch + " preset=" + o.preset + " n=" + std::to_string(n) +
                                " seed=" + std::to_string(o.seed) + " dataset=" + o.dataset);
  }
  std::cout << "saved " << o.checkpoint << " and " << history << '\n';
  return 0;
}

// Held-out part of a dataset for a checkpoint: the test side of the training
// split when the dataset is the one trained on, else every sample.
std::vector<DatasetSample> heldout_for(const cvae::Checkpoint& ck, const DatasetFile& file) {
  if (file.header.scenario_seed == ck.meta.dataset_seed && file.header.order == ck.model.order()) {
    return split_dataset(file.samples, ck.meta.train_fraction, ck.meta.split_seed).test;
  }
  return file.samples;
}

int cmd_eval(const Options& o) {
  if (o.checkpoint.empty() || o.dataset.empty()) throw InvalidInputError("--checkpoint and --dataset are required");
  const auto mode = cvae::parse_z_mode(o.z_mode);
  const auto ck = cvae::load_checkpoint(o.checkpoint);
  const DatasetFile file = load_dataset(o.dataset);
  if (file.header.order != ck.model.order()) throw DimensionError("dataset order does not match the checkpoint");
  const auto samples = heldout_for(ck, file);
  const std::string out = o.out.empty() ? o.checkpoint + ".eval.json" : o.out;
  print_resolved("eval", {{"checkpoint", o.checkpoint}, {"dataset", o.dataset},
                          {"arch", cvae::to_string(ck.model.config.arch)},
                          {"preset", cvae::to_string(ck.meta.preset)}, {"n", str(ck.model.order())},
                          {"z_mode", o.z_mode}, {"seed", str(o.seed)},
                          {"samples", str(samples.size())}, {"out", out}});
  const EvalReport report = evaluate_model(ck.model, std::span<const DatasetSample>(samples), mode, o.seed);
  EvalContext ctx{cvae::to_string(ck.model.config.arch), cvae::to_string(ck.meta.preset),
                  ck.model.order(), o.z_mode, o.checkpoint, o.dataset, file.header.scenario_seed,
                  ck.meta.split_seed, ck.meta.init_seed, ck.meta.epoch};
  const auto j = to_json(report, ctx);
  std::ofstream os(out, std::ios::trunc);
  if (!os) throw Error("cannot write " + out);
  os << j.dump(2) << '\n';
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_solve(const Options& o) {
  if (o.matrix.empty()) throw InvalidInputError("a cost matrix file is required");
  const CostMatrix cost = read_matrix_file(o.matrix);
  print_resolved("solve", {{"matrix", o.matrix}, {"n", str(cost.order())}, {"solver", o.solver},
                           {"checkpoint", o.checkpoint.empty() ? "-" : o.checkpoint},
                           {"z_mode", o.z_mode}, {"seed", str(o.seed)}});
  Permutation perm;
  if (o.solver == "hungarian") {
    perm = hungarian_solve(cost).permutation;
  } else if (o.solver == "model") {
    if (o.checkpoint.empty()) throw InvalidInputError("--solver=model needs --checkpoint");
    const auto ck = cvae::load_checkpoint(o.checkpoint);
    SplitMix64 rng(o.seed);
    const auto y = cvae::predict(ck.model, cost, cvae::parse_z_mode(o.z_mode), &rng);
    const auto rows = decode_rows(y);
    if (Permutation::is_bijection(rows)) {
      perm = Permutation(rows);
    } else {
      perm = repair_to_permutation(y);
      std::cout << "note: row argmax collided; greedy repair applied\n";
    }
  } else {
    throw InvalidInputError("--solver must be hungarian or model");
  }
  std::cout << "permutation: " << perm_string(perm) << '\n';
  std::cout << "cost: " << std::setprecision(17) << assignment_cost(cost, perm) << '\n';
  std::cout << "sum rate: " << std::setprecision(17) << sum_rate(cost, perm) << '\n';
  return 0;
}

int cmd_bench(const Options& o) {
  const std::size_t count = o.count == 0 ? 1000 : o.count;
  const auto cfg = scenario(o);
  print_resolved("bench", {{"solver", o.solver}, {"n", str(o.n)}, {"m", str(cfg.m_d2d)},
                           {"count", str(count)}, {"seed", str(o.seed)},
                           {"checkpoint", o.checkpoint.empty() ? "-" : o.checkpoint},
                           {"arch", o.arch}, {"preset", o.preset}, {"warmup", str(kWarmupIterations)}});
  std::vector<CostMatrix> instances;
  instances.reserve(count);
  for (std::size_t k = 0; k < count; ++k) instances.push_back(d2d::realize(cfg, sample_seed(o.seed, k)).cost);
  LatencyStats stats;
  if (o.solver == "hungarian") {
    double sink = 0.0;
    stats = latency_benchmark(count, [&](std::size_t k) { sink += hungarian_solve(instances[k]).total_cost; });
    if (!std::isfinite(sink)) throw Error("non-finite Hungarian total");
  } else if (o.solver == "model") {
    cvae::CvaeModel<float> model;
    if (!o.checkpoint.empty()) {
      model = cvae::load_checkpoint(o.checkpoint).model;
      if (model.order() != static_cast<std::size_t>(o.n)) throw DimensionError("--n does not match the checkpoint");
    } else {
      model = cvae::CvaeModel<float>(cvae::make_config(cvae::parse_arch(o.arch), o.n, cvae::parse_preset(o.preset)));
      model.init(o.seed);
    }
    const auto mode = cvae::parse_z_mode(o.z_mode);
    SplitMix64 rng(o.seed);
    stats = latency_benchmark(count, [&](std::size_t k) { (void)cvae::predict(model, instances[k], mode, &rng); });
  } else {
    throw InvalidInputError("--solver must be hungarian or model");
  }
  std::cout << std::fixed << std::setprecision(1);
  std::cout << "solver      n   timed   p50_us   p95_us   mean_us\n";
  std::cout << std::left << std::setw(10) << o.solver << std::right << std::setw(3) << o.n << std::setw(8)
            << stats.timed << std::setw(9) << stats.p50_us << std::setw(9) << stats.p95_us << std::setw(10)
            << stats.mean_us << '\n';
  return 0;
}

int cmd_latent(const Options& o) {
  if (o.checkpoint.empty() || o.dataset.empty()) throw InvalidInputError("--checkpoint and --dataset are required");
  const auto ck = cvae::load_checkpoint(o.checkpoint);
  const DatasetFile file = load_dataset(o.dataset);
  if (file.header.order != ck.model.order()) throw DimensionError("dataset order does not match the checkpoint");
  auto samples = heldout_for(ck, file);
  const std::size_t limit = o.count == 0 ? 5000 : o.count;
  if (samples.size() > limit) samples.resize(limit);
  const std::string out = o.out.empty() ? o.checkpoint + ".latent.csv" : o.out;
  print_resolved("latent", {{"checkpoint", o.checkpoint}, {"dataset", o.dataset},
                            {"count", str(samples.size())}, {"out", out}});
  const LatentDump dump = latent_dump(ck.model, std::span<const DatasetSample>(samples));
  const ClusterSeparation sep = cluster_separation(dump);
  std::ofstream os(out, std::ios::trunc);
  if (!os) throw Error("cannot write " + out);
  write_latent_csv(os, dump,
                   "checkpoint=" + o.checkpoint + " dataset=" + o.dataset + " dataset_seed=" +
                       std::to_string(file.header.scenario_seed) + " init_seed=" +
                       std::to_string(ck.meta.init_seed));
  std::cout << "clusters " << sep.clusters << "  mean intra " << sep.mean_intra << "  mean inter "
            << sep.mean_inter << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned linear sum assignment for D2D spectrum sharing"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) { sub->add_option("--seed", o.seed, "Random seed")->capture_default_str(); };

  auto* gen = app.add_subcommand("generate", "Generate a labeled dataset of D2D cost matrices");
  gen->add_option("--n", o.n, "Number of cellular users (matrix order)")->capture_default_str();
  gen->add_option("--m", o.m, "Number of D2D pairs (default ceil(3n/4))");
  gen->add_option("--count", o.count, "Number of samples")->required();
  gen->add_option("--out", o.out, "Dataset output path")->required();
  add_common(gen);

  auto* tr = app.add_subcommand("train", "Train a CVAE on a dataset (90/10 split)");
  tr->add_option("--dataset", o.dataset, "Dataset file")->required();
  tr->add_option("--arch", o.arch, "fnn | cnn | hybrid")->capture_default_str()
      ->check(CLI::IsMember({"fnn", "cnn", "hybrid"}));
  tr->add_option("--preset", o.preset, "desk | paper")->capture_default_str()
      ->check(CLI::IsMember({"desk", "paper"}));
  tr->add_option("--epochs", o.epochs, "Training epochs")->capture_default_str();
  tr->add_option("--batch", o.batch, "Minibatch size")->capture_default_str();
  tr->add_option("--lr", o.lr, "Adam learning rate")->capture_default_str();
  tr->add_option("--lr-schedule", o.lr_schedule, "constant | cosine (annealed per epoch)")->capture_default_str()
      ->check(CLI::IsMember({"constant", "cosine"}));
  tr->add_option("--kl-weight", o.kl_weight, "Weight of the KL term")->capture_default_str();
  tr->add_option("--z-mode", o.z_mode, "Latent at held-out evaluation: mean | sample")->capture_default_str()
      ->check(CLI::IsMember({"mean", "sample"}));
  tr->add_flag("--augment", o.augment,
               "Relabel CUs and D2D pairs at random per training sample (symmetry augmentation)");
  tr->add_option("--checkpoint", o.checkpoint, "Checkpoint output path")->required();
  tr->add_option("--out", o.out, "History CSV path (default <checkpoint>.history.csv)");
  add_common(tr);

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint and write an EvalReport JSON");
  ev->add_option("--checkpoint", o.checkpoint, "Checkpoint file")->required();
  ev->add_option("--dataset", o.dataset, "Dataset file")->required();
  ev->add_option("--z-mode", o.z_mode, "mean | sample")->capture_default_str()
      ->check(CLI::IsMember({"mean", "sample"}));
  ev->add_option("--out", o.out, "Report path (default <checkpoint>.eval.json)");
  add_common(ev);

  auto* so = app.add_subcommand("solve", "Solve one cost matrix read from a text file");
  so->add_option("matrix", o.matrix, "Text file: n, then n rows of n reals")->required();
  so->add_option("--solver", o.solver, "hungarian | model")->capture_default_str()
      ->check(CLI::IsMember({"hungarian", "model"}));
  so->add_option("--checkpoint", o.checkpoint, "Checkpoint for --solver=model");
  so->add_option("--z-mode", o.z_mode, "mean | sample")->capture_default_str()
      ->check(CLI::IsMember({"mean", "sample"}));
  add_common(so);

  auto* be = app.add_subcommand("bench", "Per-solve latency on generated instances");
  be->add_option("--solver", o.solver, "hungarian | model")->capture_default_str()
      ->check(CLI::IsMember({"hungarian", "model"}));
  be->add_option("--n", o.n, "Matrix order")->capture_default_str();
  be->add_option("--m", o.m, "Number of D2D pairs (default ceil(3n/4))");
  be->add_option("--count", o.count, "Instances, first 10 are warm-up (default 1000)");
  be->add_option("--checkpoint", o.checkpoint, "Checkpoint for --solver=model (else a fresh model)");
  be->add_option("--arch", o.arch, "Architecture of a fresh model")->capture_default_str()
      ->check(CLI::IsMember({"fnn", "cnn", "hybrid"}));
  be->add_option("--preset", o.preset, "Preset of a fresh model")->capture_default_str()
      ->check(CLI::IsMember({"desk", "paper"}));
  be->add_option("--z-mode", o.z_mode, "mean | sample")->capture_default_str()
      ->check(CLI::IsMember({"mean", "sample"}));
  add_common(be);

  auto* la = app.add_subcommand("latent", "Export a 2-D PCA map of posterior means as CSV");
  la->add_option("--checkpoint", o.checkpoint, "Checkpoint file")->required();
  la->add_option("--dataset", o.dataset, "Dataset file")->required();
  la->add_option("--count", o.count, "Maximum samples (default 5000)");
  la->add_option("--out", o.out, "CSV path (default <checkpoint>.latent.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) return cmd_generate(o);
    if (*tr) return cmd_train(o);
    if (*ev) return cmd_eval(o);
    if (*so) return cmd_solve(o);
    if (*be) return cmd_bench(o);
    if (*la) return cmd_latent(o);
  } catch (const lsap::InvalidInputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
