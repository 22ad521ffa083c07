// Copyright 2026 The lsapcvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "lsap/cvae.hpp"
#include "lsap/dataset.hpp"
#include "lsap/train.hpp"

namespace lsap::cvae {

/// Provenance stored next to the weights.
struct CheckpointMeta {
  Preset preset = Preset::kDesk;
  std::uint64_t init_seed = 0;
  int epoch = 0;
  std::string dataset;
  std::uint64_t dataset_seed = 0;
  std::uint64_t split_seed = 0;
  double train_fraction = 0.9;
  TrainConfig train;
};

struct Checkpoint {
  CheckpointMeta meta;
  CvaeModel<float> model;
};

inline constexpr const char* kCheckpointMagic = "lsapcvae-checkpoint";
inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline std::string join_sizes(const std::vector<std::size_t>& v, char sep = ',') {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (k) s += sep;
    s += std::to_string(v[k]);
  }
  return s;
}

inline std::vector<std::size_t> split_sizes(const std::string& s, char sep = ',') {
  std::vector<std::size_t> out;
  if (s.empty() || s == "-") return out;
  std::istringstream is(s);
  std::string part;
  while (std::getline(is, part, sep)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoul(part, &used));
      if (used != part.size()) throw FormatError("");
    } catch (const std::exception&) {
      throw FormatError("checkpoint: bad size list '" + s + "'");
    }
  }
  return out;
}

inline std::string kernels_string(const std::vector<Kernel>& ks) {
  if (ks.empty()) return "-";
  std::string s;
  for (std::size_t k = 0; k < ks.size(); ++k) {
    if (k) s += ',';
    s += std::to_string(ks[k].h) + "x" + std::to_string(ks[k].w) + ":" + nn::to_string(ks[k].padding);
  }
  return s;
}

inline std::vector<Kernel> parse_kernels(const std::string& s) {
  std::vector<Kernel> out;
  if (s == "-") return out;
  std::istringstream is(s);
  std::string part;
  while (std::getline(is, part, ',')) {
    const auto x = part.find('x'), colon = part.find(':');
    if (x == std::string::npos || colon == std::string::npos || colon < x) {
      throw FormatError("checkpoint: bad kernel '" + part + "'");
    }
    Kernel k;
    k.h = split_sizes(part.substr(0, x)).at(0);
    k.w = split_sizes(part.substr(x + 1, colon - x - 1)).at(0);
    const std::string pad = part.substr(colon + 1);
    if (pad == "same") k.padding = nn::Padding::kSame;
    else if (pad == "valid") k.padding = nn::Padding::kValid;
    else throw FormatError("checkpoint: bad padding '" + pad + "'");
    out.push_back(k);
  }
  return out;
}

/// Parameter names in params() order, e.g. "cost_encoder.conv0.weight".
inline std::vector<std::string> parameter_names(const ModelConfig& c) {
  std::vector<std::string> names;
  for (const auto& layer : layer_plan(c)) {
    names.push_back(layer.name + ".weight");
    names.push_back(layer.name + ".bias");
  }
  return names;
}

}  // namespace detail

/// Text header of `key = value` lines, one `tensor = name shape` line per
/// parameter, `end_header`, then every parameter as little-endian f32 in
/// params() order (weights before bias within a layer).
inline void write_checkpoint(std::ostream& os, CvaeModel<float>& model, const CheckpointMeta& meta) {
  const ModelConfig& c = model.config;
  std::ostringstream h;
  h.precision(17);
  h << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  h << "arch = " << to_string(c.arch) << '\n';
  h << "order = " << c.order << '\n';
  h << "preset = " << to_string(meta.preset) << '\n';
  h << "conv_channels = " << (c.conv_channels.empty() ? "-" : detail::join_sizes(c.conv_channels)) << '\n';
  h << "conv_kernels = " << detail::kernels_string(c.conv_kernels) << '\n';
  h << "fc_widths = " << detail::join_sizes(c.fc_widths) << '\n';
  h << "latent_dim = " << c.latent_dim << '\n';
  h << "init_seed = " << meta.init_seed << '\n';
  h << "epoch = " << meta.epoch << '\n';
  h << "dataset = " << (meta.dataset.empty() ? "-" : meta.dataset) << '\n';
  h << "dataset_seed = " << meta.dataset_seed << '\n';
  h << "split_seed = " << meta.split_seed << '\n';
  h << "train_fraction = " << meta.train_fraction << '\n';
  h << "train_epochs = " << meta.train.epochs << '\n';
  h << "train_batch = " << meta.train.batch_size << '\n';
  h << "train_lr = " << meta.train.lr << '\n';
  h << "train_lr_schedule = " << to_string(meta.train.lr_schedule) << '\n';
  h << "train_kl_weight = " << meta.train.kl_weight << '\n';
  h << "train_kl_warmup_epochs = " << meta.train.kl_warmup_epochs << '\n';
  h << "train_seed = " << meta.train.seed << '\n';
  h << "train_augment_rows = " << meta.train.augment_rows << '\n';
  h << "train_z_mode = " << to_string(meta.train.test_z_mode) << '\n';
  const auto names = detail::parameter_names(c);
  const auto params = model.params();
  if (names.size() != params.size()) throw Error("checkpoint: parameter list does not match layer plan");
  for (std::size_t k = 0; k < params.size(); ++k) {
    h << "tensor = " << names[k] << ' ' << detail::join_sizes(params[k].value->shape(), 'x') << '\n';
  }
  h << "end_header\n";
  os << h.str();
  for (const auto& p : params) {
    for (float v : p.value->values()) lsap::detail::put_le(os, std::bit_cast<std::uint32_t>(v), 4);
  }
  if (!os) throw Error("checkpoint: write failed");
}

inline Checkpoint read_checkpoint(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw TruncatedFileError("checkpoint: empty file");
  {
    std::istringstream first(line);
    std::string magic;
    int version = 0;
    first >> magic >> version;
    if (magic != kCheckpointMagic) throw FormatError("not a checkpoint file");
    if (version != kCheckpointVersion) {
      throw FormatError("unsupported checkpoint version " + std::to_string(version));
    }
  }
  std::map<std::string, std::string> kv;
  std::vector<std::pair<std::string, std::string>> tensors;
  bool ended = false;
  while (std::getline(is, line)) {
    if (line == "end_header") {
      ended = true;
      break;
    }
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw FormatError("checkpoint: bad header line '" + line + "'");
    const std::string key = line.substr(0, eq), value = line.substr(eq + 3);
    if (key == "tensor") {
      const auto sp = value.rfind(' ');
      if (sp == std::string::npos) throw FormatError("checkpoint: bad tensor line '" + line + "'");
      tensors.emplace_back(value.substr(0, sp), value.substr(sp + 1));
    } else {
      kv[key] = value;
    }
  }
  if (!ended) throw TruncatedFileError("checkpoint: header has no end_header line");

  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError("checkpoint: missing header key '" + key + "'");
    return it->second;
  };
  auto num = [&]<typename V>(const std::string& key, V& out) {
    std::istringstream vs(get(key));
    vs >> out;
    if (!vs || !(vs >> std::ws).eof()) throw FormatError("checkpoint: bad value for '" + key + "'");
  };

  ModelConfig c;
  c.arch = parse_arch(get("arch"));
  num("order", c.order);
  c.conv_channels = detail::split_sizes(get("conv_channels"));
  c.conv_kernels = detail::parse_kernels(get("conv_kernels"));
  c.fc_widths = detail::split_sizes(get("fc_widths"));
  num("latent_dim", c.latent_dim);
  try {
    c.validate();
  } catch (const InvalidInputError& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }

  Checkpoint ck;
  CheckpointMeta& m = ck.meta;
  m.preset = parse_preset(get("preset"));
  num("init_seed", m.init_seed);
  num("epoch", m.epoch);
  m.dataset = get("dataset") == "-" ? std::string() : get("dataset");
  num("dataset_seed", m.dataset_seed);
  num("split_seed", m.split_seed);
  num("train_fraction", m.train_fraction);
  num("train_epochs", m.train.epochs);
  num("train_batch", m.train.batch_size);
  num("train_lr", m.train.lr);
  m.train.lr_schedule = parse_lr_schedule(get("train_lr_schedule"));
  num("train_kl_weight", m.train.kl_weight);
  num("train_kl_warmup_epochs", m.train.kl_warmup_epochs);
  num("train_seed", m.train.seed);
  num("train_augment_rows", m.train.augment_rows);
  m.train.test_z_mode = parse_z_mode(get("train_z_mode"));

  ck.model = CvaeModel<float>(c);
  const auto names = detail::parameter_names(c);
  auto params = ck.model.params();
  if (tensors.size() != params.size()) {
    throw FormatError("checkpoint: expected " + std::to_string(params.size()) + " tensors, header lists " +
                      std::to_string(tensors.size()));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (tensors[k].first != names[k] ||
        detail::split_sizes(tensors[k].second, 'x') != params[k].value->shape()) {
      throw FormatError("checkpoint: tensor " + std::to_string(k) + " is '" + tensors[k].first + " " +
                        tensors[k].second + "', expected '" + names[k] + " " +
                        detail::join_sizes(params[k].value->shape(), 'x') + "'");
    }
  }
  for (auto& p : params) {
    const std::size_t bytes = p.value->size() * 4;
    std::vector<unsigned char> buf(bytes);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
    if (static_cast<std::size_t>(is.gcount()) != bytes) throw TruncatedFileError("checkpoint: weights truncated");
    for (std::size_t k = 0; k < p.value->size(); ++k) {
      (*p.value)[k] =
          std::bit_cast<float>(static_cast<std::uint32_t>(lsap::detail::get_le(buf.data() + 4 * k, 4)));
    }
  }
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("checkpoint: trailing bytes");
  return ck;
}

inline void save_checkpoint(const std::string& path, CvaeModel<float>& model, const CheckpointMeta& meta) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path + " for writing");
  write_checkpoint(out, model, meta);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path);
  return read_checkpoint(in);
}

}  // namespace lsap::cvae
