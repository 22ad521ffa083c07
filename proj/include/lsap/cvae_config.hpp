// Copyright 2026 The lsapcvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "lsap/errors.hpp"
#include "lsap/nn/layers.hpp"

namespace lsap::cvae {

enum class Arch { kFnn, kCnn, kHybrid };
enum class Preset { kDesk, kPaper };

inline const char* to_string(Arch a) {
  switch (a) {
    case Arch::kFnn: return "fnn";
    case Arch::kCnn: return "cnn";
    case Arch::kHybrid: return "hybrid";
  }
  return "?";
}

inline const char* to_string(Preset p) { return p == Preset::kDesk ? "desk" : "paper"; }

inline Arch parse_arch(const std::string& s) {
  if (s == "fnn") return Arch::kFnn;
  if (s == "cnn") return Arch::kCnn;
  if (s == "hybrid") return Arch::kHybrid;
  throw InvalidInputError("unknown architecture '" + s + "' (expected fnn, cnn or hybrid)");
}

inline Preset parse_preset(const std::string& s) {
  if (s == "desk") return Preset::kDesk;
  if (s == "paper") return Preset::kPaper;
  throw InvalidInputError("unknown preset '" + s + "' (expected desk or paper)");
}

struct Kernel {
  std::size_t h = 3;
  std::size_t w = 3;
  nn::Padding padding = nn::Padding::kSame;
  friend bool operator==(const Kernel&, const Kernel&) = default;
};

/// Layer widths of one CVAE. Both encoders share the encoder layout; the
/// decoder is fully connected with fc_widths reversed, then n*n outputs.
struct ModelConfig {
  Arch arch = Arch::kHybrid;
  std::size_t order = 4;
  std::vector<std::size_t> conv_channels;
  std::vector<Kernel> conv_kernels;
  // Always populated: encoder FC widths for FNN/Hybrid, decoder mirror source for all.
  std::vector<std::size_t> fc_widths;
  std::size_t latent_dim = 16;

  std::vector<std::size_t> encoder_fc_widths() const {
    return arch == Arch::kCnn ? std::vector<std::size_t>{} : fc_widths;
  }

  std::vector<std::size_t> decoder_widths() const {
    return {fc_widths.rbegin(), fc_widths.rend()};
  }

  void validate() const {
    auto fail = [](const std::string& what) { throw InvalidInputError("model config: " + what); };
    if (order < 1) fail("order must be >= 1");
    if (latent_dim < 1) fail("latent_dim must be >= 1");
    if (conv_channels.size() != conv_kernels.size()) fail("one kernel per conv layer");
    if (fc_widths.empty()) fail("fc_widths may not be empty (decoder mirrors it)");
    switch (arch) {
      case Arch::kFnn:
        if (!conv_channels.empty()) fail("FNN has no conv layers");
        break;
      case Arch::kCnn:
        if (conv_channels.empty()) fail("CNN needs conv layers");
        break;
      case Arch::kHybrid:
        if (conv_channels.empty()) fail("Hybrid needs conv layers");
        break;
    }
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Desk: conv 32-16, FC 128-64, latent 16.
/// Paper: the published full-size widths for n in {4, 8, 16}, latent 16/32/64.
/// Conv kernels are 3x3 "same" except a final 2x2 "valid" stage; at n = 4
/// with the full-size widths that is exactly 3x3, 3x3, 2x2.
inline ModelConfig make_config(Arch arch, std::size_t n, Preset preset) {
  ModelConfig c;
  c.arch = arch;
  c.order = n;
  if (preset == Preset::kDesk) {
    c.conv_channels = {32, 16};
    c.fc_widths = {128, 64};
    c.latent_dim = 16;
  } else {
    switch (n) {
      case 4:
        c.conv_channels = {256, 128, 64};
        c.fc_widths = {512, 256, 128, 64};
        c.latent_dim = 16;
        break;
      case 8:
        c.conv_channels = {1024, 512, 256, 128, 64};
        c.fc_widths = {4096, 1024, 512, 256};
        c.latent_dim = 32;
        break;
      case 16:
        c.conv_channels = {4096, 2048, 1024, 512, 128, 64};
        c.fc_widths = {4096, 2048, 1024, 512, 256};
        c.latent_dim = 64;
        break;
      default:
        throw InvalidInputError("paper preset exists only for n = 4, 8, 16");
    }
  }
  if (arch == Arch::kFnn) {
    c.conv_channels.clear();
  } else {
    for (std::size_t k = 0; k < c.conv_channels.size(); ++k) {
      const bool last = k + 1 == c.conv_channels.size();
      c.conv_kernels.push_back(last ? Kernel{2, 2, nn::Padding::kValid}
                                    : Kernel{3, 3, nn::Padding::kSame});
    }
  }
  c.validate();
  return c;
}

enum class LayerKind { kConv, kDense, kHead };

/// Static description of one layer, used for conformance checks and
/// checkpoint headers without allocating weights.
struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::kDense;
  std::vector<std::size_t> input_shape;   // per sample
  std::vector<std::size_t> output_shape;  // per sample
  Kernel kernel{};
  bool relu = true;
};

struct EncoderPlan {
  std::vector<LayerSpec> layers;
  std::size_t feature_dim = 0;
};

inline EncoderPlan plan_encoder(const ModelConfig& c, const std::string& prefix) {
  EncoderPlan plan;
  std::size_t channels = 1, h = c.order, w = c.order;
  for (std::size_t k = 0; k < c.conv_channels.size(); ++k) {
    const Kernel& kern = c.conv_kernels[k];
    const auto g = nn::conv_geometry(h, w, kern.h, kern.w, 1, kern.padding);
    LayerSpec s;
    s.name = prefix + ".conv" + std::to_string(k);
    s.kind = LayerKind::kConv;
    s.input_shape = {channels, h, w};
    s.output_shape = {c.conv_channels[k], g.out_h, g.out_w};
    s.kernel = kern;
    plan.layers.push_back(s);
    channels = c.conv_channels[k];
    h = g.out_h;
    w = g.out_w;
  }
  std::size_t features = channels * h * w;
  const auto widths = c.encoder_fc_widths();
  for (std::size_t k = 0; k < widths.size(); ++k) {
    LayerSpec s;
    s.name = prefix + ".fc" + std::to_string(k);
    s.kind = LayerKind::kDense;
    s.input_shape = {features};
    s.output_shape = {widths[k]};
    plan.layers.push_back(s);
    features = widths[k];
  }
  plan.feature_dim = features;
  return plan;
}

/// Full layer list: cost encoder, label encoder, mu/logvar heads, decoder.
inline std::vector<LayerSpec> layer_plan(const ModelConfig& c) {
  c.validate();
  const auto cost = plan_encoder(c, "cost_encoder");
  const auto label = plan_encoder(c, "label_encoder");
  std::vector<LayerSpec> out = cost.layers;
  out.insert(out.end(), label.layers.begin(), label.layers.end());
  const std::size_t joint = cost.feature_dim + label.feature_dim;
  out.push_back({"mu_head", LayerKind::kHead, {joint}, {c.latent_dim}, {}, false});
  out.push_back({"logvar_head", LayerKind::kHead, {joint}, {c.latent_dim}, {}, false});
  std::size_t in = c.latent_dim + cost.feature_dim;
  const auto widths = c.decoder_widths();
  for (std::size_t k = 0; k <= widths.size(); ++k) {
    const std::size_t width = k < widths.size() ? widths[k] : c.order * c.order;
    out.push_back({"decoder.fc" + std::to_string(k), LayerKind::kDense, {in}, {width}, {}, true});
    in = width;
  }
  return out;
}

inline std::size_t parameter_count(const ModelConfig& c) {
  std::size_t total = 0;
  for (const auto& s : layer_plan(c)) {
    if (s.kind == LayerKind::kConv) {
      total += s.output_shape[0] * (s.input_shape[0] * s.kernel.h * s.kernel.w + 1);
    } else {
      total += s.output_shape[0] * (s.input_shape[0] + 1);
    }
  }
  return total;
}

}  // namespace lsap::cvae
