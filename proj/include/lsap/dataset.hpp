// Copyright 2026 The lsapcvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "lsap/assignment.hpp"
#include "lsap/d2d.hpp"
#include "lsap/hungarian.hpp"
#include "lsap/nn/tensor.hpp"
#include "lsap/rng.hpp"

namespace lsap {

/// Raw (signed, cost-unit) matrix with its Hungarian-optimal label.
struct DatasetSample {
  CostMatrix raw_cost;
  Permutation label;
  friend bool operator==(const DatasetSample&, const DatasetSample&) = default;
};

/// On-disk layout, all little-endian:
///
///   "LSAP" | u16 version = 1 | u16 n | u64 count | u64 scenario seed
///   count x ( n*n f32 raw cost, row-major | n u8 label )
struct DatasetHeader {
  static constexpr char kMagic[4] = {'L', 'S', 'A', 'P'};
  static constexpr std::uint16_t kVersion = 1;
  static constexpr std::size_t kBytes = 4 + 2 + 2 + 8 + 8;

  std::uint16_t version = kVersion;
  std::uint16_t order = 0;
  std::uint64_t count = 0;
  std::uint64_t scenario_seed = 0;

  std::size_t record_bytes() const { return std::size_t{order} * order * 4 + order; }
};

struct DatasetFile {
  DatasetHeader header;
  std::vector<DatasetSample> samples;
};

namespace detail {

inline void put_le(std::ostream& os, std::uint64_t v, int bytes) {
  char buf[8];
  for (int k = 0; k < bytes; ++k) buf[k] = static_cast<char>((v >> (8 * k)) & 0xFF);
  os.write(buf, bytes);
}

inline std::uint64_t get_le(const unsigned char* p, int bytes) {
  std::uint64_t v = 0;
  for (int k = 0; k < bytes; ++k) v |= std::uint64_t{p[k]} << (8 * k);
  return v;
}

}  // namespace detail

/// Costs are stored as f32; values must already be f32-representable for the
/// round trip to be lossless (generate_samples guarantees this).
inline void write_dataset(std::ostream& os, std::uint64_t scenario_seed,
                          const std::vector<DatasetSample>& samples) {
  if (samples.empty()) throw InvalidInputError("refusing to write an empty dataset");
  const std::size_t n = samples.front().raw_cost.order();
  if (n > 255) throw SizeLimitError("labels are stored as u8; n must be <= 255");
  os.write(DatasetHeader::kMagic, 4);
  detail::put_le(os, DatasetHeader::kVersion, 2);
  detail::put_le(os, n, 2);
  detail::put_le(os, samples.size(), 8);
  detail::put_le(os, scenario_seed, 8);
  std::vector<char> record(n * n * 4 + n);
  for (const auto& s : samples) {
    if (s.raw_cost.order() != n || s.label.size() != n) {
      throw DimensionError("dataset samples must share one order");
    }
    char* p = record.data();
    for (double v : s.raw_cost.values()) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      for (int k = 0; k < 4; ++k) *p++ = static_cast<char>((bits >> (8 * k)) & 0xFF);
    }
    for (int c : s.label.map()) *p++ = static_cast<char>(static_cast<unsigned char>(c));
    os.write(record.data(), static_cast<std::streamsize>(record.size()));
  }
  if (!os) throw Error("dataset write failed");
}

inline DatasetFile read_dataset(std::istream& is) {
  unsigned char head[DatasetHeader::kBytes];
  is.read(reinterpret_cast<char*>(head), sizeof head);
  if (is.gcount() != static_cast<std::streamsize>(sizeof head)) {
    throw TruncatedFileError("dataset header is truncated");
  }
  if (std::memcmp(head, DatasetHeader::kMagic, 4) != 0) throw FormatError("bad dataset magic");
  DatasetFile file;
  file.header.version = static_cast<std::uint16_t>(detail::get_le(head + 4, 2));
  if (file.header.version != DatasetHeader::kVersion) {
    throw FormatError("unsupported dataset version " + std::to_string(file.header.version));
  }
  file.header.order = static_cast<std::uint16_t>(detail::get_le(head + 6, 2));
  file.header.count = detail::get_le(head + 8, 8);
  file.header.scenario_seed = detail::get_le(head + 16, 8);
  const std::size_t n = file.header.order;
  if (n == 0) throw FormatError("dataset order is zero");

  std::vector<unsigned char> record(file.header.record_bytes());
  file.samples.reserve(static_cast<std::size_t>(file.header.count));
  for (std::uint64_t k = 0; k < file.header.count; ++k) {
    is.read(reinterpret_cast<char*>(record.data()), static_cast<std::streamsize>(record.size()));
    if (is.gcount() != static_cast<std::streamsize>(record.size())) {
      throw TruncatedFileError("dataset declares " + std::to_string(file.header.count) +
                               " records but ends after " + std::to_string(k));
    }
    std::vector<double> costs(n * n);
    const unsigned char* p = record.data();
    for (auto& c : costs) {
      c = std::bit_cast<float>(static_cast<std::uint32_t>(detail::get_le(p, 4)));
      p += 4;
    }
    std::vector<int> map(n);
    for (auto& c : map) {
      c = *p++;
      if (static_cast<std::size_t>(c) >= n) {
        throw FormatError("record " + std::to_string(k) + ": label index out of range");
      }
    }
    if (!Permutation::is_bijection(map)) {
      throw FormatError("record " + std::to_string(k) + ": label is not a permutation");
    }
    file.samples.push_back({CostMatrix(n, std::move(costs)), Permutation(std::move(map))});
  }
  if (is.peek() != std::char_traits<char>::eof()) {
    throw FormatError("dataset has trailing bytes beyond the declared record count");
  }
  return file;
}

inline void save_dataset(const std::string& path, std::uint64_t scenario_seed,
                         const std::vector<DatasetSample>& samples) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path + " for writing");
  write_dataset(out, scenario_seed, samples);
}

inline DatasetFile load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dataset " + path);
  return read_dataset(in);
}

/// Per-sample seed: the dataset seed XOR the sample index.
inline std::uint64_t sample_seed(std::uint64_t seed, std::uint64_t index) { return seed ^ index; }

/// One labeled sample. Costs are rounded to f32 before solving so the stored
/// label is optimal for exactly the stored matrix.
inline DatasetSample make_sample(const d2d::ScenarioConfig& config, std::uint64_t seed) {
  CostMatrix cost = d2d::realize(config, seed).cost;
  for (double& v : cost.values()) v = static_cast<float>(v);
  SolveResult solved = hungarian_solve(cost);
  return {std::move(cost), std::move(solved.permutation)};
}

inline std::vector<DatasetSample> generate_samples(const d2d::ScenarioConfig& config,
                                                   std::size_t count, std::uint64_t seed) {
  config.validate();
  if (count < 1) throw InvalidInputError("dataset count must be >= 1");
  std::vector<DatasetSample> samples;
  samples.reserve(count);
  for (std::size_t k = 0; k < count; ++k) samples.push_back(make_sample(config, sample_seed(seed, k)));
  return samples;
}

struct GenerateSummary {
  std::size_t count = 0;
  double mean_optimal_cost = 0.0;
};

/// Writes the dataset to `destination` and its scenario to `destination.cfg`.
inline GenerateSummary generate_dataset(const d2d::ScenarioConfig& config, std::size_t count,
                                        std::uint64_t seed, const std::string& destination) {
  const auto samples = generate_samples(config, count, seed);
  save_dataset(destination, seed, samples);
  {
    std::ofstream cfg(destination + ".cfg", std::ios::trunc);
    if (!cfg) throw Error("cannot write " + destination + ".cfg");
    d2d::write_config(cfg, config);
    cfg << "# seed = " << seed << "\n# count = " << count << '\n';
  }
  double total = 0.0;
  for (const auto& s : samples) total += assignment_cost(s.raw_cost, s.label);
  return {count, total / static_cast<double>(count)};
}

struct Split {
  std::vector<DatasetSample> train;
  std::vector<DatasetSample> test;
};

/// Shuffles with SplitMix64(seed); the first floor(fraction * size) go to train.
inline Split split_dataset(const std::vector<DatasetSample>& samples, double train_fraction,
                           std::uint64_t seed) {
  if (samples.empty()) throw InvalidInputError("cannot split an empty dataset");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidInputError("train fraction must lie strictly between 0 and 1");
  }
  std::vector<std::size_t> order(samples.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  SplitMix64 rng(seed);
  shuffle(std::span(order), rng);
  const auto n_train =
      static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(samples.size())));
  Split split;
  split.train.reserve(n_train);
  split.test.reserve(samples.size() - n_train);
  for (std::size_t k = 0; k < order.size(); ++k) {
    (k < n_train ? split.train : split.test).push_back(samples[order[k]]);
  }
  return split;
}

/// Per-matrix min-max scaling into [0, 1]; a constant matrix maps to 0.5.
template <typename T = float>
nn::Tensor<T> normalize_cost(const CostMatrix& raw) {
  const auto values = raw.values();
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double range = *hi - *lo;
  nn::Tensor<T> out({raw.order(), raw.order()});
  for (std::size_t k = 0; k < values.size(); ++k) {
    out[k] = range > 0.0 ? static_cast<T>((values[k] - *lo) / range) : T(0.5);
  }
  return out;
}

}  // namespace lsap
