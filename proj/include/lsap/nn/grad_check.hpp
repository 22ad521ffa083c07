// Copyright 2026 The lsapcvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <vector>

#include "lsap/nn/layers.hpp"
#include "lsap/rng.hpp"

namespace lsap::nn {

/// Something with double parameters, a scalar loss, and analytic gradients.
/// kink_signature() describes the piecewise-linear regime (ReLU signs, clamp
/// hits) of the most recent forward pass.
template <typename O>
concept DifferentiableObjective = requires(O& o) {
  { o.params() } -> std::same_as<std::vector<ParamRef<double>>>;
  { o.loss() } -> std::convertible_to<double>;
  { o.loss_and_grad() } -> std::convertible_to<double>;
  { o.kink_signature() } -> std::same_as<std::vector<std::uint8_t>>;
};

struct GradCheckOptions {
  std::size_t coordinates = 256;
  double step = 1e-5;
  // Denominator floor for the relative error |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
  std::uint64_t seed = 0x5eed;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  // Coordinates whose +/- step crossed a ReLU or clamp boundary.
  std::size_t skipped_at_kinks = 0;
};

/// Central finite differences, (L(p + h) - L(p - h)) / 2h, against the
/// analytic gradient on a random subset of parameter coordinates.
template <DifferentiableObjective O>
GradCheckReport grad_check(O& objective, const GradCheckOptions& options = {}) {
  objective.loss_and_grad();
  auto params = objective.params();
  const auto base_signature = objective.kink_signature();

  struct Coord {
    std::size_t tensor, index;
  };
  std::vector<Coord> all;
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (std::size_t k = 0; k < params[t].value->size(); ++k) all.push_back({t, k});
  }
  SplitMix64 rng(options.seed);
  shuffle(std::span(all), rng);
  if (all.size() > options.coordinates) all.resize(options.coordinates);

  std::vector<double> analytic(all.size());
  for (std::size_t c = 0; c < all.size(); ++c) {
    analytic[c] = (*params[all[c].tensor].grad)[all[c].index];
  }

  GradCheckReport report;
  for (std::size_t c = 0; c < all.size(); ++c) {
    double& p = (*params[all[c].tensor].value)[all[c].index];
    const double saved = p;
    p = saved + options.step;
    const double plus = objective.loss();
    const bool plus_same = objective.kink_signature() == base_signature;
    p = saved - options.step;
    const double minus = objective.loss();
    const bool minus_same = objective.kink_signature() == base_signature;
    p = saved;
    if (!plus_same || !minus_same) {
      ++report.skipped_at_kinks;
      continue;
    }
    const double numeric = (plus - minus) / (2.0 * options.step);
    const double denom =
        std::max({std::fabs(analytic[c]), std::fabs(numeric), options.floor});
    report.max_relative_error =
        std::max(report.max_relative_error, std::fabs(analytic[c] - numeric) / denom);
    ++report.checked;
  }
  return report;
}

}  // namespace lsap::nn
