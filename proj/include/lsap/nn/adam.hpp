// Copyright 2026 The lsapcvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "lsap/errors.hpp"
#include "lsap/nn/layers.hpp"

namespace lsap::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moments for one parameter tensor.
struct AdamState {
  AdamConfig config;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::int64_t step_count = 0;

  AdamState() = default;
  AdamState(std::size_t size, AdamConfig cfg)
      : config(cfg), first_moment(size, 0.0), second_moment(size, 0.0) {}
};

/// One bias-corrected Adam update (Kingma & Ba, Algorithm 1):
///   m = b1 m + (1 - b1) g,  v = b2 v + (1 - b2) g^2
///   p -= lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
/// Moments are kept in double regardless of T.
template <typename T>
void adam_step(AdamState& state, std::span<T> params, std::span<const T> grads) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
    throw DimensionError("adam: parameter, gradient and state sizes differ");
  }
  const auto& c = state.config;
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double g = grads[k];
    double& m = state.first_moment[k];
    double& v = state.second_moment[k];
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g * g;
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    params[k] = static_cast<T>(static_cast<double>(params[k]) -
                               c.lr * m_hat / (std::sqrt(v_hat) + c.epsilon));
  }
}

/// Adam over a fixed list of parameter tensors.
template <typename T>
class Adam {
 public:
  Adam(std::vector<ParamRef<T>> params, AdamConfig config) : params_(std::move(params)) {
    states_.reserve(params_.size());
    for (const auto& p : params_) states_.emplace_back(p.value->size(), config);
  }

  void step() {
    for (std::size_t k = 0; k < params_.size(); ++k) {
      adam_step<T>(states_[k], params_[k].value->values(), params_[k].grad->values());
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.grad->fill(T(0));
  }

  const std::vector<AdamState>& states() const { return states_; }

  /// Changes the step size; moments and step counts are kept.
  void set_lr(double lr) {
    for (auto& s : states_) s.config.lr = lr;
  }

 private:
  std::vector<ParamRef<T>> params_;
  std::vector<AdamState> states_;
};

}  // namespace lsap::nn
