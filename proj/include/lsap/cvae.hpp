// Copyright 2026 The lsapcvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lsap/cvae_config.hpp"
#include "lsap/errors.hpp"
#include "lsap/nn/layers.hpp"
#include "lsap/nn/tensor.hpp"
#include "lsap/rng.hpp"

namespace lsap::cvae {

using nn::Tensor;

inline constexpr double kLogvarMin = -10.0;
inline constexpr double kLogvarMax = 10.0;

/// Conv stack (ReLU after each) then dense stack (ReLU after each).
/// Input is a batch of flattened n x n matrices, shape [B, n*n].
template <typename T>
struct Encoder {
  std::size_t order = 0;
  std::vector<nn::Conv2D<T>> convs;
  std::vector<nn::Dense<T>> fcs;

  struct Trace {
    std::vector<Tensor<T>> conv_in, conv_pre, fc_in, fc_pre;
  };

  Encoder() = default;
  explicit Encoder(const ModelConfig& c) : order(c.order) {
    std::size_t channels = 1, h = c.order, w = c.order;
    for (std::size_t k = 0; k < c.conv_channels.size(); ++k) {
      const auto& kern = c.conv_kernels[k];
      convs.emplace_back(channels, c.conv_channels[k], kern.h, kern.w, 1, kern.padding);
      const auto g = convs.back().geometry(h, w);
      channels = c.conv_channels[k];
      h = g.out_h;
      w = g.out_w;
    }
    std::size_t features = channels * h * w;
    for (std::size_t width : c.encoder_fc_widths()) {
      fcs.emplace_back(features, width);
      features = width;
    }
  }

  template <typename U>
  explicit Encoder(const Encoder<U>& other) : order(other.order) {
    for (const auto& c : other.convs) convs.emplace_back(c);
    for (const auto& f : other.fcs) fcs.emplace_back(f);
  }

  void init(SplitMix64& rng) {
    for (auto& c : convs) c.init(rng);
    for (auto& f : fcs) f.init(rng);
  }

  Tensor<T> forward(const Tensor<T>& x, Trace* trace) const {
    const std::size_t batch = x.dim(0);
    if (x.size() != batch * order * order) {
      throw DimensionError("encoder: expected [B," + std::to_string(order * order) + "] input, got " +
                           nn::shape_string(x.shape()));
    }
    Tensor<T> h = x;
    if (!convs.empty()) {
      h = std::move(h).reshaped({batch, 1, order, order});
      for (const auto& conv : convs) {
        Tensor<T> pre = conv.forward(h);
        if (trace) trace->conv_in.push_back(std::move(h));
        h = nn::relu(pre);
        if (trace) trace->conv_pre.push_back(std::move(pre));
      }
      const std::size_t flat = h.size() / batch;
      h = std::move(h).reshaped({batch, flat});
    }
    for (const auto& fc : fcs) {
      Tensor<T> pre = fc.forward(h);
      if (trace) trace->fc_in.push_back(std::move(h));
      h = nn::relu(pre);
      if (trace) trace->fc_pre.push_back(std::move(pre));
    }
    return h;
  }

  /// Backpropagates dL/d(features) into parameter gradients. The input
  /// gradient is not needed (inputs are data) and is not formed.
  void backward(const Trace& trace, Tensor<T> grad) {
    for (std::size_t k = fcs.size(); k-- > 0;) {
      grad = nn::relu_backward(trace.fc_pre[k], std::move(grad));
      if (k == 0 && convs.empty()) {
        fcs[k].backward(trace.fc_in[k], grad);
        return;
      }
      grad = fcs[k].backward(trace.fc_in[k], grad);
    }
    for (std::size_t k = convs.size(); k-- > 0;) {
      grad = std::move(grad).reshaped(trace.conv_pre[k].shape());
      grad = nn::relu_backward(trace.conv_pre[k], std::move(grad));
      grad = convs[k].backward(trace.conv_in[k], grad);
    }
  }

  void append_params(std::vector<nn::ParamRef<T>>& out) {
    for (auto& c : convs) for (auto p : c.params()) out.push_back(p);
    for (auto& f : fcs) for (auto p : f.params()) out.push_back(p);
  }

  std::size_t feature_dim() const {
    if (!fcs.empty()) return fcs.back().out_features();
    const auto& last = convs.back();
    std::size_t h = order, w = order;
    for (const auto& c : convs) {
      const auto g = c.geometry(h, w);
      h = g.out_h;
      w = g.out_w;
    }
    return last.out_channels() * h * w;
  }
};

/// Posterior parameters, batch-major [B, latent]. logvar is already clamped.
template <typename T>
struct LatentPair {
  Tensor<T> mu;
  Tensor<T> logvar;
};

struct LossBreakdown {
  double recon = 0.0;
  double kl = 0.0;
  double total = 0.0;
};

/// Two encoders (cost matrix, one-hot label), mu/logvar heads over the
/// concatenated features, and a dense decoder fed [z, cost features].
/// The label encoder is used only in training; predict never touches it.
template <typename T>
struct CvaeModel {
  ModelConfig config;
  Encoder<T> cost_encoder;
  Encoder<T> label_encoder;
  nn::Dense<T> mu_head;
  nn::Dense<T> logvar_head;
  std::vector<nn::Dense<T>> decoder;

  CvaeModel() = default;
  explicit CvaeModel(const ModelConfig& c) : config(c), cost_encoder(c), label_encoder(c) {
    c.validate();
    const std::size_t features = cost_encoder.feature_dim();
    mu_head = nn::Dense<T>(2 * features, c.latent_dim);
    logvar_head = nn::Dense<T>(2 * features, c.latent_dim);
    std::size_t in = c.latent_dim + features;
    for (std::size_t width : c.decoder_widths()) {
      decoder.emplace_back(in, width);
      in = width;
    }
    decoder.emplace_back(in, c.order * c.order);
  }

  template <typename U>
  explicit CvaeModel(const CvaeModel<U>& other)
      : config(other.config),
        cost_encoder(other.cost_encoder),
        label_encoder(other.label_encoder),
        mu_head(other.mu_head),
        logvar_head(other.logvar_head) {
    for (const auto& d : other.decoder) decoder.emplace_back(d);
  }

  /// Draws every weight from SplitMix64(seed) in parameter order. The output
  /// layer starts with zero weights and bias 1/n, the mean of a one-hot
  /// target row. Random output weights push rarely-targeted ReLU outputs
  /// below zero on every input early on, and they never recover.
  void init(std::uint64_t seed) {
    SplitMix64 rng(seed);
    cost_encoder.init(rng);
    label_encoder.init(rng);
    mu_head.init(rng, 1.0);
    logvar_head.init(rng, 1.0);
    for (std::size_t k = 0; k + 1 < decoder.size(); ++k) decoder[k].init(rng);
    decoder.back().weight.fill(T(0));
    decoder.back().bias.fill(static_cast<T>(1.0 / static_cast<double>(config.order)));
  }

  std::size_t order() const { return config.order; }
  std::size_t latent_dim() const { return config.latent_dim; }
  std::size_t feature_dim() const { return cost_encoder.feature_dim(); }

  /// Checkpoint order: cost encoder, label encoder, mu head, logvar head,
  /// decoder; within a layer weights then bias; conv before dense.
  std::vector<nn::ParamRef<T>> params() {
    std::vector<nn::ParamRef<T>> out;
    cost_encoder.append_params(out);
    label_encoder.append_params(out);
    for (auto p : mu_head.params()) out.push_back(p);
    for (auto p : logvar_head.params()) out.push_back(p);
    for (auto& d : decoder) for (auto p : d.params()) out.push_back(p);
    return out;
  }

  void zero_grad() {
    for (auto& p : params()) p.grad->fill(T(0));
  }
};

/// Everything a backward pass needs from one training forward pass.
template <typename T>
struct ForwardPass {
  typename Encoder<T>::Trace cost_trace, label_trace;
  Tensor<T> cost_features;
  Tensor<T> joint;
  LatentPair<T> latent;
  Tensor<T> logvar_raw;
  Tensor<T> eps;
  Tensor<T> z;
  std::vector<Tensor<T>> dec_in, dec_pre;
  Tensor<T> yhat;
};

namespace detail {

template <typename T>
Tensor<T> concat_features(const Tensor<T>& a, const Tensor<T>& b) {
  const std::size_t batch = a.dim(0), da = a.stride0(), db = b.stride0();
  if (b.dim(0) != batch) throw DimensionError("concat: batch sizes differ");
  Tensor<T> out({batch, da + db});
  for (std::size_t r = 0; r < batch; ++r) {
    std::copy_n(a.data() + r * da, da, out.data() + r * (da + db));
    std::copy_n(b.data() + r * db, db, out.data() + r * (da + db) + da);
  }
  return out;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_features(const Tensor<T>& joint, std::size_t first) {
  const std::size_t batch = joint.dim(0), width = joint.stride0();
  Tensor<T> a({batch, first}), b({batch, width - first});
  for (std::size_t r = 0; r < batch; ++r) {
    std::copy_n(joint.data() + r * width, first, a.data() + r * first);
    std::copy_n(joint.data() + r * width + first, width - first, b.data() + r * (width - first));
  }
  return {std::move(a), std::move(b)};
}

template <typename T>
Tensor<T> as_batch(const Tensor<T>& x, std::size_t per_sample) {
  if (x.size() % per_sample != 0) throw DimensionError("input size is not a multiple of n*n");
  return x.reshaped({x.size() / per_sample, per_sample});
}

}  // namespace detail

/// mu and clamped logvar from cost matrices x and one-hot labels y, both
/// [B, n*n] (or [n, n] for a single sample).
template <typename T>
LatentPair<T> encode(const CvaeModel<T>& model, const Tensor<T>& x, const Tensor<T>& y_one_hot,
                     ForwardPass<T>* pass = nullptr) {
  const std::size_t nn2 = model.order() * model.order();
  const Tensor<T> xb = detail::as_batch(x, nn2);
  const Tensor<T> yb = detail::as_batch(y_one_hot, nn2);
  if (xb.dim(0) != yb.dim(0)) throw DimensionError("encode: cost and label batch sizes differ");
  Tensor<T> hc = model.cost_encoder.forward(xb, pass ? &pass->cost_trace : nullptr);
  Tensor<T> hl = model.label_encoder.forward(yb, pass ? &pass->label_trace : nullptr);
  Tensor<T> joint = detail::concat_features(hc, hl);
  LatentPair<T> lat{model.mu_head.forward(joint), model.logvar_head.forward(joint)};
  Tensor<T> raw = lat.logvar;
  for (auto& v : lat.logvar.values()) {
    v = std::clamp(v, static_cast<T>(kLogvarMin), static_cast<T>(kLogvarMax));
  }
  if (pass) {
    pass->cost_features = std::move(hc);
    pass->joint = std::move(joint);
    pass->logvar_raw = std::move(raw);
  }
  return lat;
}

/// z = mu + exp(logvar / 2) * eps.
template <typename T>
Tensor<T> reparameterize(const LatentPair<T>& lat, const Tensor<T>& eps) {
  if (eps.size() != lat.mu.size()) throw DimensionError("reparameterize: eps shape mismatch");
  Tensor<T> z(lat.mu.shape());
  for (std::size_t k = 0; k < z.size(); ++k) {
    z[k] = lat.mu[k] + std::exp(lat.logvar[k] / T(2)) * eps[k];
  }
  return z;
}

/// KL(N(mu, diag(exp(logvar))) || N(0, I)) = -1/2 sum(1 + logvar - mu^2 - exp(logvar)),
/// summed over every entry (all samples of a batch). Each summand is >= 0.
template <typename T>
double kl_divergence(const LatentPair<T>& lat) {
  if (lat.mu.size() != lat.logvar.size()) throw DimensionError("kl: mu/logvar shape mismatch");
  double total = 0.0;
  for (std::size_t k = 0; k < lat.mu.size(); ++k) {
    const double m = lat.mu[k], lv = lat.logvar[k];
    // expm1 keeps the near-prior terms accurate: exp(lv) - 1 - lv >= 0.
    total += 0.5 * (m * m + (std::expm1(lv) - lv));
  }
  return total;
}

/// Decoder over [z, cost features]; ReLU on every layer including the output.
/// Returns [B, n, n].
template <typename T>
Tensor<T> decode(const CvaeModel<T>& model, const Tensor<T>& z, const Tensor<T>& cost_features,
                 ForwardPass<T>* pass = nullptr) {
  const std::size_t batch = z.size() / model.latent_dim();
  if (z.size() != batch * model.latent_dim() ||
      cost_features.size() != batch * model.feature_dim()) {
    throw DimensionError("decode: z / cost feature shapes do not match the decoder input");
  }
  Tensor<T> h = detail::concat_features(z.reshaped({batch, model.latent_dim()}),
                                        cost_features.reshaped({batch, model.feature_dim()}));
  for (const auto& layer : model.decoder) {
    Tensor<T> pre = layer.forward(h);
    if (pass) pass->dec_in.push_back(std::move(h));
    h = nn::relu(pre);
    if (pass) pass->dec_pre.push_back(std::move(pre));
  }
  return std::move(h).reshaped({batch, model.order(), model.order()});
}

/// Batch means (batch = leading dim of lat.mu, 1 for a rank-1 mu): recon = 1/2 ||yhat - y||^2 per sample, kl per sample,
/// total = recon + kl_weight * kl.
template <typename T>
LossBreakdown cvae_loss(const Tensor<T>& yhat, const Tensor<T>& y_one_hot, const LatentPair<T>& lat,
                        double kl_weight) {
  if (yhat.size() != y_one_hot.size()) throw DimensionError("cvae loss: yhat/y shape mismatch");
  const std::size_t batch = lat.mu.rank() >= 2 ? lat.mu.dim(0) : 1;
  const double scale = 1.0 / static_cast<double>(std::max<std::size_t>(batch, 1));
  LossBreakdown out;
  out.recon = nn::l2_loss(yhat, y_one_hot) * scale;
  out.kl = kl_divergence(lat) * scale;
  out.total = out.recon + kl_weight * out.kl;
  return out;
}

/// Training forward pass on a batch: x, y are [B, n*n], eps is [B, latent].
template <typename T>
ForwardPass<T> forward_train(const CvaeModel<T>& model, const Tensor<T>& x, const Tensor<T>& y,
                             const Tensor<T>& eps) {
  ForwardPass<T> pass;
  pass.latent = encode(model, x, y, &pass);
  pass.eps = eps.reshaped(pass.latent.mu.shape());
  pass.z = reparameterize(pass.latent, pass.eps);
  pass.yhat = decode(model, pass.z, pass.cost_features, &pass);
  return pass;
}

/// Accumulates the gradient of the batch-mean loss into the model's
/// gradient tensors. y is [B, n*n].
template <typename T>
void backward_train(CvaeModel<T>& model, const ForwardPass<T>& pass, const Tensor<T>& y,
                    double kl_weight) {
  const std::size_t batch = pass.z.dim(0);
  const std::size_t latent = model.latent_dim();
  const T inv_batch = T(1) / static_cast<T>(batch);
  const T beta = static_cast<T>(kl_weight) * inv_batch;

  Tensor<T> grad = nn::l2_loss_backward(pass.yhat, y.reshaped(pass.yhat.shape()), inv_batch);
  grad = std::move(grad).reshaped({batch, model.order() * model.order()});
  for (std::size_t k = model.decoder.size(); k-- > 0;) {
    grad = nn::relu_backward(pass.dec_pre[k], std::move(grad));
    grad = model.decoder[k].backward(pass.dec_in[k], grad);
  }
  auto [dz, dcost_from_decoder] = detail::split_features(grad, latent);

  const auto& mu = pass.latent.mu;
  const auto& lv = pass.latent.logvar;
  Tensor<T> dmu({batch, latent}), dlv({batch, latent});
  for (std::size_t k = 0; k < dmu.size(); ++k) {
    const T sigma = std::exp(lv[k] / T(2));
    dmu[k] = dz[k] + beta * mu[k];
    const T raw = pass.logvar_raw[k];
    const bool inside = raw >= static_cast<T>(kLogvarMin) && raw <= static_cast<T>(kLogvarMax);
    dlv[k] = inside ? dz[k] * pass.eps[k] * sigma / T(2) + beta * std::expm1(lv[k]) / T(2) : T(0);
  }
  Tensor<T> djoint = model.mu_head.backward(pass.joint, dmu);
  const Tensor<T> djoint_lv = model.logvar_head.backward(pass.joint, dlv);
  for (std::size_t k = 0; k < djoint.size(); ++k) djoint[k] += djoint_lv[k];

  auto [dcost, dlabel] = detail::split_features(djoint, model.feature_dim());
  for (std::size_t k = 0; k < dcost.size(); ++k) dcost[k] += dcost_from_decoder[k];
  model.cost_encoder.backward(pass.cost_trace, std::move(dcost));
  model.label_encoder.backward(pass.label_trace, std::move(dlabel));
}

/// ReLU sign pattern and logvar clamp hits of a forward pass.
template <typename T>
std::vector<std::uint8_t> kink_signature(const ForwardPass<T>& pass) {
  std::vector<std::uint8_t> sig;
  auto add = [&](const Tensor<T>& pre) {
    for (T v : pre.values()) sig.push_back(v > T(0) ? 1 : 0);
  };
  for (const auto* trace : {&pass.cost_trace, &pass.label_trace}) {
    for (const auto& p : trace->conv_pre) add(p);
    for (const auto& p : trace->fc_pre) add(p);
  }
  for (const auto& p : pass.dec_pre) add(p);
  for (T v : pass.logvar_raw.values()) {
    sig.push_back(v < static_cast<T>(kLogvarMin) ? 2 : v > static_cast<T>(kLogvarMax) ? 3 : 4);
  }
  return sig;
}

}  // namespace lsap::cvae
