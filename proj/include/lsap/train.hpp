// Copyright 2026 The lsapcvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "lsap/cvae.hpp"
#include "lsap/dataset.hpp"
#include "lsap/metrics.hpp"
#include "lsap/nn/adam.hpp"
#include "lsap/nn/denormals.hpp"
#include "lsap/rng.hpp"

namespace lsap::cvae {

enum class ZMode { kPriorMean, kSample };

inline const char* to_string(ZMode m) { return m == ZMode::kPriorMean ? "mean" : "sample"; }

inline ZMode parse_z_mode(const std::string& s) {
  if (s == "mean") return ZMode::kPriorMean;
  if (s == "sample") return ZMode::kSample;
  throw InvalidInputError("unknown z mode '" + s + "' (expected mean or sample)");
}

enum class LrSchedule { kConstant, kCosine };

inline const char* to_string(LrSchedule s) { return s == LrSchedule::kConstant ? "constant" : "cosine"; }

inline LrSchedule parse_lr_schedule(const std::string& s) {
  if (s == "constant") return LrSchedule::kConstant;
  if (s == "cosine") return LrSchedule::kCosine;
  throw InvalidInputError("unknown lr schedule '" + s + "' (expected constant or cosine)");
}

struct TrainConfig {
  int epochs = 150;
  std::size_t batch_size = 128;
  double lr = 1e-3;
  // Cosine anneals per epoch: lr * (1 + cos(pi * (epoch - 1) / epochs)) / 2.
  LrSchedule lr_schedule = LrSchedule::kConstant;
  double kl_weight = 1.0;
  // Linear KL ramp from 0 to kl_weight over this many epochs; 0 disables it.
  int kl_warmup_epochs = 0;
  std::uint64_t seed = 1;
  ZMode test_z_mode = ZMode::kPriorMean;
  // Symmetry augmentation, 0 disables it. Otherwise every training sample is
  // presented under a fresh random relabeling of all columns (CUs) and of its
  // first augment_rows rows (the real D2D pairs; dummy rows stay last). Both
  // relabelings map an optimal assignment to an optimal assignment.
  std::size_t augment_rows = 0;

  void validate() const {
    if (epochs < 1) throw InvalidInputError("epochs must be >= 1");
    if (batch_size < 1) throw InvalidInputError("batch size must be >= 1");
    if (!(kl_weight >= 0.0)) throw InvalidInputError("kl weight must be >= 0");
    if (!(lr > 0.0)) throw InvalidInputError("learning rate must be > 0");
    if (kl_warmup_epochs < 0) throw InvalidInputError("kl warm-up must be >= 0");
  }
};

/// Learning rate used during a 1-based epoch.
inline double epoch_lr(const TrainConfig& c, int epoch) {
  if (c.lr_schedule == LrSchedule::kConstant) return c.lr;
  const double pi = 3.14159265358979323846;
  return c.lr * 0.5 * (1.0 + std::cos(pi * (epoch - 1) / c.epochs));
}

struct EpochStats {
  int epoch = 0;  // 1-based
  double recon = 0.0;
  double kl = 0.0;
  double total = 0.0;
  double heldout_accuracy = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> history;
};

/// Flattened network inputs for a list of samples.
struct EncodedBatch {
  Tensor<float> costs;   // [N, n*n], min-max normalized
  Tensor<float> labels;  // [N, n*n], one-hot
  std::vector<Permutation> perms;
};

inline EncodedBatch encode_samples(std::span<const DatasetSample> samples) {
  if (samples.empty()) throw InvalidInputError("no samples");
  const std::size_t n = samples.front().raw_cost.order();
  EncodedBatch out{Tensor<float>({samples.size(), n * n}), Tensor<float>({samples.size(), n * n}),
                   {}};
  out.perms.reserve(samples.size());
  for (std::size_t b = 0; b < samples.size(); ++b) {
    const auto& s = samples[b];
    if (s.raw_cost.order() != n) throw DimensionError("samples of mixed order");
    const auto x = normalize_cost<float>(s.raw_cost);
    std::copy(x.values().begin(), x.values().end(), out.costs.data() + b * n * n);
    for (std::size_t r = 0; r < n; ++r) out.labels[b * n * n + r * n + s.label[r]] = 1.0f;
    out.perms.push_back(s.label);
  }
  return out;
}

/// Decoder output for normalized costs [B, n*n], using only the cost
/// encoder. z is zero (prior mean) or drawn from N(0, I) with `rng`.
template <typename T>
Tensor<T> predict_normalized(const CvaeModel<T>& model, const Tensor<T>& costs, ZMode mode,
                             SplitMix64* rng = nullptr) {
  const nn::FlushDenormals ftz;
  const std::size_t nn2 = model.order() * model.order();
  const Tensor<T> xb = detail::as_batch(costs, nn2);
  const Tensor<T> features = model.cost_encoder.forward(xb, nullptr);
  Tensor<T> z({xb.dim(0), model.latent_dim()});
  if (mode == ZMode::kSample) {
    if (rng == nullptr) throw InvalidInputError("sample mode needs a random generator");
    for (auto& v : z.values()) v = static_cast<T>(rng->normal());
  }
  return decode(model, z, features);
}

/// Test-time solve of one raw cost matrix: returns the n x n score matrix.
template <typename T>
Tensor<T> predict(const CvaeModel<T>& model, const CostMatrix& raw_cost,
                  ZMode mode = ZMode::kPriorMean, SplitMix64* rng = nullptr) {
  if (raw_cost.order() != model.order()) {
    throw DimensionError("model solves n = " + std::to_string(model.order()) + ", matrix has n = " +
                         std::to_string(raw_cost.order()));
  }
  Tensor<T> x = normalize_cost<T>(raw_cost);
  Tensor<T> y = predict_normalized(model, std::move(x).reshaped({1, raw_cost.order() * raw_cost.order()}),
                                   mode, rng);
  return std::move(y).reshaped({raw_cost.order(), raw_cost.order()});
}

/// Batched predictions for many normalized inputs, in chunks of `chunk`.
template <typename T>
Tensor<T> predict_all(const CvaeModel<T>& model, const Tensor<T>& costs, ZMode mode,
                      std::uint64_t seed = 0, std::size_t chunk = 1024) {
  const std::size_t nn2 = model.order() * model.order();
  const std::size_t count = costs.size() / nn2;
  Tensor<T> out({count, model.order(), model.order()});
  SplitMix64 rng(seed);
  for (std::size_t start = 0; start < count; start += chunk) {
    const std::size_t len = std::min(chunk, count - start);
    Tensor<T> part({len, nn2},
                   std::vector<T>(costs.data() + start * nn2, costs.data() + (start + len) * nn2));
    const Tensor<T> y = predict_normalized(model, part, mode, &rng);
    std::copy(y.values().begin(), y.values().end(), out.data() + start * nn2);
  }
  return out;
}

namespace detail {

inline void gather_rows(const Tensor<float>& src, std::span<const std::size_t> rows,
                        Tensor<float>& dst) {
  const std::size_t width = src.stride0();
  dst = Tensor<float>({rows.size(), width});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy_n(src.data() + rows[r] * width, width, dst.data() + r * width);
  }
}

/// Applies an independent random row/column relabeling to every sample of a
/// batch of n x n matrices; x and y get the same relabeling.
inline void relabel_batch(Tensor<float>& x, Tensor<float>& y, std::size_t n, std::size_t rows,
                          SplitMix64& rng) {
  std::vector<std::size_t> row_map(n), col_map(n);
  std::vector<float> tmp(n * n);
  for (std::size_t b = 0; b < x.dim(0); ++b) {
    for (std::size_t k = 0; k < n; ++k) row_map[k] = col_map[k] = k;
    shuffle(std::span(row_map).first(rows), rng);
    shuffle(std::span(col_map), rng);
    for (Tensor<float>* t : {&x, &y}) {
      float* m = t->data() + b * n * n;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) tmp[i * n + j] = m[row_map[i] * n + col_map[j]];
      }
      std::copy(tmp.begin(), tmp.end(), m);
    }
  }
}

}  // namespace detail

using EpochCallback = std::function<void(const EpochStats&, const CvaeModel<float>&)>;

/// Minibatch Adam on the batch-mean CVAE loss, one standard-normal eps per
/// sample per step. Shuffling and eps both come from SplitMix64(seed), so a
/// run is fully determined by (model init, samples, config).
///
/// Held-out accuracy is measured after every epoch with the configured
/// test-time z. If `heldout` is empty the last 10% of `train_samples`
/// (at least one) are held out instead.
inline TrainResult train(CvaeModel<float>& model, std::span<const DatasetSample> train_samples,
                         const TrainConfig& config, std::span<const DatasetSample> heldout = {},
                         const EpochCallback& on_epoch = {}) {
  config.validate();
  const nn::FlushDenormals ftz;
  if (train_samples.empty()) throw InvalidInputError("training set is empty");
  if (heldout.empty()) {
    if (train_samples.size() < 2) throw InvalidInputError("need >= 2 samples to carve a held-out slice");
    const std::size_t held = std::max<std::size_t>(1, train_samples.size() / 10);
    heldout = train_samples.subspan(train_samples.size() - held);
    train_samples = train_samples.subspan(0, train_samples.size() - held);
  }
  if (train_samples.front().raw_cost.order() != model.order()) {
    throw DimensionError("training samples do not match the model order");
  }
  if (config.augment_rows > model.order()) {
    throw InvalidInputError("augment_rows exceeds the matrix order");
  }
  const EncodedBatch data = encode_samples(train_samples);
  const EncodedBatch held = encode_samples(heldout);
  const std::size_t count = train_samples.size();
  const std::size_t latent = model.latent_dim();

  nn::Adam<float> adam(model.params(), nn::AdamConfig{config.lr, 0.9, 0.999, 1e-8});
  SplitMix64 rng(config.seed);
  SplitMix64 eval_rng = rng.split();
  std::vector<std::size_t> order(count);
  for (std::size_t k = 0; k < count; ++k) order[k] = k;

  TrainResult result;
  Tensor<float> xb, yb;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double kl_weight =
        config.kl_warmup_epochs > 0
            ? config.kl_weight * std::min(1.0, static_cast<double>(epoch) / config.kl_warmup_epochs)
            : config.kl_weight;
    adam.set_lr(epoch_lr(config, epoch));
    shuffle(std::span(order), rng);
    EpochStats stats;
    stats.epoch = epoch;
    for (std::size_t start = 0; start < count; start += config.batch_size) {
      const std::size_t len = std::min(config.batch_size, count - start);
      const std::span<const std::size_t> rows(order.data() + start, len);
      detail::gather_rows(data.costs, rows, xb);
      detail::gather_rows(data.labels, rows, yb);
      if (config.augment_rows > 0) detail::relabel_batch(xb, yb, model.order(), config.augment_rows, rng);
      Tensor<float> eps({len, latent});
      for (auto& v : eps.values()) v = static_cast<float>(rng.normal());

      const ForwardPass<float> pass = forward_train(model, xb, yb, eps);
      const LossBreakdown loss = cvae_loss(pass.yhat, yb, pass.latent, kl_weight);
      if (!std::isfinite(loss.total)) {
        throw TrainingDivergedError("loss became non-finite in epoch " + std::to_string(epoch) +
                                    " (recon " + std::to_string(loss.recon) + ", kl " +
                                    std::to_string(loss.kl) + ")");
      }
      adam.zero_grad();
      backward_train(model, pass, yb, kl_weight);
      adam.step();

      const double w = static_cast<double>(len) / static_cast<double>(count);
      stats.recon += w * loss.recon;
      stats.kl += w * loss.kl;
      stats.total += w * loss.total;
    }
    SplitMix64 epoch_eval_rng = eval_rng;
    const Tensor<float> pred =
        predict_all(model, held.costs, config.test_z_mode, epoch_eval_rng.next());
    stats.heldout_accuracy = lsap_accuracy(pred, std::span<const Permutation>(held.perms));
    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats, model);
  }
  return result;
}

/// epoch,reconLoss,klLoss,totalLoss,heldoutAccuracy
inline void write_history_csv(std::ostream& os, const std::vector<EpochStats>& history,
                              const std::string& comment = {}) {
  if (!comment.empty()) os << "# " << comment << '\n';
  os << "epoch,reconLoss,klLoss,totalLoss,heldoutAccuracy\n";
  os.precision(9);
  for (const auto& h : history) {
    os << h.epoch << ',' << h.recon << ',' << h.kl << ',' << h.total << ',' << h.heldout_accuracy
       << '\n';
  }
}

}  // namespace lsap::cvae
