// Copyright 2026 The lsapcvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lsap/assignment.hpp"
#include "lsap/cvae.hpp"
#include "lsap/dataset.hpp"
#include "lsap/metrics.hpp"
#include "lsap/rng.hpp"
#include "lsap/train.hpp"

namespace lsap {

inline constexpr int kEvalReportVersion = 1;
inline constexpr int kLatentDumpVersion = 1;
inline constexpr std::size_t kWarmupIterations = 10;
inline constexpr std::size_t kMinBenchInstances = 100;

struct LatencyStats {
  double p50_us = 0.0;
  double p95_us = 0.0;
  double mean_us = 0.0;
  std::size_t timed = 0;  // excludes warm-up
};

/// Nearest-rank percentile of an ascending sample, q in (0, 100].
inline double percentile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw InvalidInputError("percentile of an empty sample");
  const auto rank = static_cast<std::size_t>(std::ceil(q / 100.0 * static_cast<double>(sorted.size())));
  return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

inline LatencyStats latency_stats(std::vector<double> micros) {
  if (micros.empty()) throw InvalidInputError("no latency samples");
  std::sort(micros.begin(), micros.end());
  LatencyStats s;
  s.p50_us = percentile(micros, 50.0);
  s.p95_us = percentile(micros, 95.0);
  double total = 0.0;
  for (double m : micros) total += m;
  s.mean_us = total / static_cast<double>(micros.size());
  s.timed = micros.size();
  return s;
}

/// Times solve(k) for every instance index k; the first 10 calls are warm-up.
template <typename Solve>
LatencyStats latency_benchmark(std::size_t instances, Solve&& solve) {
  if (instances < kMinBenchInstances) {
    throw InvalidInputError("latency benchmark needs >= " + std::to_string(kMinBenchInstances) +
                            " instances, got " + std::to_string(instances));
  }
  using Clock = std::chrono::steady_clock;
  std::vector<double> micros;
  micros.reserve(instances - kWarmupIterations);
  for (std::size_t k = 0; k < instances; ++k) {
    const auto t0 = Clock::now();
    solve(k);
    const auto t1 = Clock::now();
    if (k >= kWarmupIterations) {
      micros.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
    }
  }
  return latency_stats(std::move(micros));
}

struct EvalReport {
  double accuracy_pct = 0.0;
  double feasibility_pct = 0.0;
  double mean_gap_pct = 0.0;
  double latency_p50_us = 0.0;
  double latency_p95_us = 0.0;
  std::size_t sample_count = 0;
};

/// Sum rate of `perm` on a raw cost matrix (costs are negated rates).
inline double sum_rate(const CostMatrix& raw_cost, const Permutation& perm) {
  return -assignment_cost(raw_cost, perm);
}

/// Accuracy, feasibility and gap of score matrices [B, n, n] against samples.
/// Latency fields are left at zero.
template <typename T>
EvalReport score_predictions(const nn::Tensor<T>& scores, std::span<const DatasetSample> samples) {
  if (samples.empty()) throw InvalidInputError("evaluation set is empty");
  const std::size_t n = samples.front().raw_cost.order();
  if (scores.size() != samples.size() * n * n) {
    throw DimensionError("score count does not match the evaluation set");
  }
  std::vector<Permutation> labels;
  labels.reserve(samples.size());
  for (const auto& s : samples) labels.push_back(s.label);

  EvalReport r;
  r.sample_count = samples.size();
  r.accuracy_pct = lsap_accuracy(scores, std::span<const Permutation>(labels));
  std::size_t feasible = 0;
  double gap = 0.0;
  for (std::size_t b = 0; b < samples.size(); ++b) {
    const auto block = scores.values().subspan(b * n * n, n * n);
    if (Permutation::is_bijection(decode_rows<T>(block, n))) ++feasible;
    const Permutation repaired = repair_to_permutation<T>(block, n);
    const double optimal = sum_rate(samples[b].raw_cost, samples[b].label);
    const double achieved = sum_rate(samples[b].raw_cost, repaired);
    gap += optimal > 0.0 ? 1.0 - achieved / optimal : 0.0;
  }
  r.feasibility_pct = 100.0 * static_cast<double>(feasible) / static_cast<double>(samples.size());
  r.mean_gap_pct = 100.0 * gap / static_cast<double>(samples.size());
  return r;
}

/// Predicts every sample one at a time (batch 1), timing each call, and
/// scores the predictions. Latency percentiles skip the first 10 calls, so
/// at least 11 samples are required.
template <typename T>
EvalReport evaluate_model(const cvae::CvaeModel<T>& model, std::span<const DatasetSample> samples,
                          cvae::ZMode mode = cvae::ZMode::kPriorMean, std::uint64_t seed = 0) {
  if (samples.empty()) throw InvalidInputError("evaluation set is empty");
  if (samples.size() <= kWarmupIterations) {
    throw InvalidInputError("evaluation needs more than " + std::to_string(kWarmupIterations) +
                            " samples (warm-up calls are not timed)");
  }
  const std::size_t n = model.order();
  nn::Tensor<T> scores({samples.size(), n, n});
  SplitMix64 rng(seed);
  using Clock = std::chrono::steady_clock;
  std::vector<double> micros;
  micros.reserve(samples.size());
  for (std::size_t b = 0; b < samples.size(); ++b) {
    const auto t0 = Clock::now();
    const nn::Tensor<T> y = cvae::predict(model, samples[b].raw_cost, mode, &rng);
    const auto t1 = Clock::now();
    if (b >= kWarmupIterations) micros.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
    std::copy(y.values().begin(), y.values().end(), scores.data() + b * n * n);
  }
  EvalReport r = score_predictions(scores, samples);
  const LatencyStats lat = latency_stats(std::move(micros));
  r.latency_p50_us = lat.p50_us;
  r.latency_p95_us = lat.p95_us;
  return r;
}

/// Provenance written next to an EvalReport.
struct EvalContext {
  std::string arch;
  std::string preset;
  std::size_t order = 0;
  std::string z_mode;
  std::string checkpoint;
  std::string dataset;
  std::uint64_t dataset_seed = 0;
  std::uint64_t split_seed = 0;
  std::uint64_t init_seed = 0;
  int epoch = 0;
};

inline nlohmann::ordered_json to_json(const EvalReport& r, const EvalContext& ctx) {
  nlohmann::ordered_json j;
  j["format"] = "lsapcvae-eval-report";
  j["format_version"] = kEvalReportVersion;
  j["accuracyPct"] = r.accuracy_pct;
  j["feasibilityPct"] = r.feasibility_pct;
  j["meanOptimalityGapPct"] = r.mean_gap_pct;
  j["latencyMicrosP50"] = r.latency_p50_us;
  j["latencyMicrosP95"] = r.latency_p95_us;
  j["sampleCount"] = r.sample_count;
  j["gapUsesGreedyRepair"] = true;
  j["config"] = {{"arch", ctx.arch},         {"preset", ctx.preset},
                 {"n", ctx.order},           {"zMode", ctx.z_mode},
                 {"checkpoint", ctx.checkpoint}, {"dataset", ctx.dataset},
                 {"datasetSeed", ctx.dataset_seed}, {"splitSeed", ctx.split_seed},
                 {"initSeed", ctx.init_seed}, {"epoch", ctx.epoch}};
  return j;
}

struct LatentPoint {
  double x = 0.0;
  double y = 0.0;
  std::size_t permutation_id = 0;  // lexicographic rank of the label
};

struct LatentDump {
  std::vector<LatentPoint> points;
  std::vector<double> explained_variance;  // top-2 covariance eigenvalues
};

/// Top-k principal directions of row vectors by power iteration with
/// deflation. Start vectors come from SplitMix64(seed); each direction is
/// sign-normalized so its largest-magnitude component is positive.
inline std::vector<std::vector<double>> principal_axes(const std::vector<std::vector<double>>& rows,
                                                       std::size_t k, std::vector<double>* eigenvalues = nullptr,
                                                       double tolerance = 1e-9, std::uint64_t seed = 0x5eed) {
  if (rows.size() < 2) throw InvalidInputError("PCA needs at least 2 points");
  const std::size_t d = rows.front().size();
  if (d == 0) throw InvalidInputError("PCA needs non-empty vectors");
  std::vector<double> mean(d, 0.0);
  for (const auto& r : rows) {
    if (r.size() != d) throw DimensionError("PCA: vectors of mixed length");
    for (std::size_t c = 0; c < d; ++c) mean[c] += r[c];
  }
  for (double& m : mean) m /= static_cast<double>(rows.size());
  std::vector<double> cov(d * d, 0.0);
  for (const auto& r : rows) {
    for (std::size_t a = 0; a < d; ++a) {
      const double da = r[a] - mean[a];
      for (std::size_t b = 0; b < d; ++b) cov[a * d + b] += da * (r[b] - mean[b]);
    }
  }
  for (double& c : cov) c /= static_cast<double>(rows.size() - 1);

  SplitMix64 rng(seed);
  std::vector<std::vector<double>> axes;
  if (eigenvalues) eigenvalues->clear();
  // Images smaller than this (relative to the total variance) are rounding
  // noise of an exhausted spectrum and must not be amplified into an axis.
  double trace = 0.0;
  for (std::size_t c = 0; c < d; ++c) trace += cov[c * d + c];
  const double floor = 1e-13 * trace;
  auto normalize = [floor](std::vector<double>& v) {
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm <= floor) return false;
    for (double& x : v) x /= norm;
    return true;
  };
  auto sign_fix = [](std::vector<double>& v) {
    const auto it = std::max_element(v.begin(), v.end(),
                                     [](double a, double b) { return std::abs(a) < std::abs(b); });
    if (*it < 0) for (double& x : v) x = -x;
  };
  for (std::size_t axis = 0; axis < std::min(k, d); ++axis) {
    std::vector<double> v(d);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    // Gram-Schmidt against the axes already found; two passes because one
    // loses orthogonality under heavy cancellation.
    auto orthogonalize = [&](std::vector<double>& w) {
      for (int pass = 0; pass < 2; ++pass) {
        for (const auto& a : axes) {
          double dot = 0.0;
          for (std::size_t c = 0; c < d; ++c) dot += w[c] * a[c];
          for (std::size_t c = 0; c < d; ++c) w[c] -= dot * a[c];
        }
      }
    };
    auto unit = [](std::vector<double>& w) {
      double norm = 0.0;
      for (double x : w) norm += x * x;
      norm = std::sqrt(norm);
      for (double& x : w) x /= norm;
    };
    orthogonalize(v);
    unit(v);
    double lambda = 0.0;
    for (int iter = 0; iter < 100000; ++iter) {
      std::vector<double> w(d, 0.0);
      for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = 0; b < d; ++b) w[a] += cov[a * d + b] * v[b];
      }
      orthogonalize(w);
      double rayleigh = 0.0;
      for (std::size_t c = 0; c < d; ++c) rayleigh += w[c] * v[c];
      lambda = rayleigh;
      if (!normalize(w)) {
        // Remaining spectrum is zero; any orthogonal unit vector will do.
        lambda = 0.0;
        break;
      }
      sign_fix(w);
      double change = 0.0;
      for (std::size_t c = 0; c < d; ++c) change = std::max(change, std::abs(w[c] - v[c]));
      v = std::move(w);
      if (change < tolerance) break;
    }
    orthogonalize(v);
    unit(v);
    sign_fix(v);
    axes.push_back(std::move(v));
    if (eigenvalues) eigenvalues->push_back(lambda);
  }
  return axes;
}

/// Mean-centered projection of latent vectors onto the top two principal
/// axes. PCA stands in for an unspecified 2-D embedding.
inline LatentDump pca_project(const std::vector<std::vector<double>>& latents,
                              std::span<const std::size_t> permutation_ids = {}) {
  if (latents.size() < 2) throw InvalidInputError("PCA needs at least 2 points");
  if (!permutation_ids.empty() && permutation_ids.size() != latents.size()) {
    throw DimensionError("one permutation id per latent vector");
  }
  LatentDump dump;
  auto axes = principal_axes(latents, 2, &dump.explained_variance);
  const std::size_t d = latents.front().size();
  std::vector<double> mean(d, 0.0);
  for (const auto& r : latents) for (std::size_t c = 0; c < d; ++c) mean[c] += r[c];
  for (double& m : mean) m /= static_cast<double>(latents.size());
  dump.points.reserve(latents.size());
  for (std::size_t p = 0; p < latents.size(); ++p) {
    LatentPoint pt;
    for (std::size_t c = 0; c < d; ++c) {
      const double centered = latents[p][c] - mean[c];
      pt.x += centered * axes[0][c];
      if (axes.size() > 1) pt.y += centered * axes[1][c];
    }
    pt.permutation_id = permutation_ids.empty() ? 0 : permutation_ids[p];
    dump.points.push_back(pt);
  }
  return dump;
}

/// Posterior means mu(x, y) for every sample, one row per sample.
template <typename T>
std::vector<std::vector<double>> posterior_means(const cvae::CvaeModel<T>& model,
                                                 std::span<const DatasetSample> samples,
                                                 std::size_t chunk = 1024) {
  std::vector<std::vector<double>> out;
  out.reserve(samples.size());
  for (std::size_t start = 0; start < samples.size(); start += chunk) {
    const auto part = samples.subspan(start, std::min(chunk, samples.size() - start));
    const cvae::EncodedBatch enc = cvae::encode_samples(part);
    const auto lat = cvae::encode(model, enc.costs.template cast<T>(), enc.labels.template cast<T>());
    const std::size_t d = model.latent_dim();
    for (std::size_t b = 0; b < part.size(); ++b) {
      out.emplace_back(lat.mu.data() + b * d, lat.mu.data() + (b + 1) * d);
    }
  }
  return out;
}

template <typename T>
LatentDump latent_dump(const cvae::CvaeModel<T>& model, std::span<const DatasetSample> samples) {
  std::vector<std::size_t> ids;
  ids.reserve(samples.size());
  for (const auto& s : samples) ids.push_back(static_cast<std::size_t>(s.label.lexicographic_rank()));
  return pca_project(posterior_means(model, samples), ids);
}

struct ClusterSeparation {
  double mean_intra = 0.0;
  double mean_inter = 0.0;
  std::size_t clusters = 0;
};

/// Mean 2-D distance over all same-label pairs and all different-label pairs.
inline ClusterSeparation cluster_separation(const LatentDump& dump) {
  double intra = 0.0, inter = 0.0;
  std::size_t n_intra = 0, n_inter = 0;
  const auto& pts = dump.points;
  for (std::size_t a = 0; a < pts.size(); ++a) {
    for (std::size_t b = a + 1; b < pts.size(); ++b) {
      const double dist = std::hypot(pts[a].x - pts[b].x, pts[a].y - pts[b].y);
      if (pts[a].permutation_id == pts[b].permutation_id) {
        intra += dist;
        ++n_intra;
      } else {
        inter += dist;
        ++n_inter;
      }
    }
  }
  std::vector<std::size_t> ids;
  for (const auto& p : pts) ids.push_back(p.permutation_id);
  std::sort(ids.begin(), ids.end());
  ClusterSeparation s;
  s.clusters = static_cast<std::size_t>(std::unique(ids.begin(), ids.end()) - ids.begin());
  s.mean_intra = n_intra ? intra / static_cast<double>(n_intra) : 0.0;
  s.mean_inter = n_inter ? inter / static_cast<double>(n_inter) : 0.0;
  return s;
}

inline void write_latent_csv(std::ostream& os, const LatentDump& dump, const std::string& provenance = {}) {
  os << "# lsapcvae-latent-dump " << kLatentDumpVersion << '\n';
  os << "# projection: PCA of posterior means (substitute 2-D map)\n";
  if (!provenance.empty()) os << "# " << provenance << '\n';
  os << "x,y,permutationId\n";
  os.precision(9);
  for (const auto& p : dump.points) os << p.x << ',' << p.y << ',' << p.permutation_id << '\n';
}

}  // namespace lsap
