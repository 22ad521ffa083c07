// Copyright 2026 The lsapcvae Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <unistd.h>

#include <gtest/gtest.h>

#include "lsap/dataset.hpp"
#include "lsap/hungarian.hpp"

namespace lsap {
namespace {

namespace fs = std::filesystem;

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() / ("lsapcvae_test_" + std::to_string(::getpid()) + "_" + name);
}

TEST(Dataset, GenerationIsByteDeterministic) {
  const auto cfg = d2d::ScenarioConfig::with_order(4);
  const auto a = temp_path("a.bin"), b = temp_path("b.bin");
  const auto sa = generate_dataset(cfg, 10, 1234, a.string());
  const auto sb = generate_dataset(cfg, 10, 1234, b.string());
  EXPECT_EQ(sa.count, 10u);
  EXPECT_EQ(sa.mean_optimal_cost, sb.mean_optimal_cost);
  EXPECT_EQ(read_bytes(a), read_bytes(b));
  EXPECT_EQ(read_bytes(a.string() + ".cfg"), read_bytes(b.string() + ".cfg"));
  EXPECT_EQ(fs::file_size(a), DatasetHeader::kBytes + 10 * (16 * 4 + 4));
  generate_dataset(cfg, 10, 1235, b.string());
  EXPECT_NE(read_bytes(a), read_bytes(b));
  for (const auto& p : {a, b}) {
    fs::remove(p);
    fs::remove(p.string() + ".cfg");
  }
}

TEST(Dataset, LabelsAreOptimalForStoredCosts) {
  const auto cfg = d2d::ScenarioConfig::with_order(6);
  const auto samples = generate_samples(cfg, 200, 77);
  for (const auto& s : samples) {
    for (double v : s.raw_cost.values()) ASSERT_EQ(v, static_cast<double>(static_cast<float>(v)));
    ASSERT_EQ(assignment_cost(s.raw_cost, s.label), hungarian_solve(s.raw_cost).total_cost);
    ASSERT_EQ(assignment_cost(s.raw_cost, s.label), brute_force_solve(s.raw_cost).total_cost);
  }
}

TEST(Dataset, ScenarioIsNotDegenerate) {
  const auto samples = generate_samples(d2d::ScenarioConfig::with_order(4), 1000, 5);
  std::set<std::uint64_t> ranks;
  for (const auto& s : samples) ranks.insert(s.label.lexicographic_rank());
  EXPECT_GT(ranks.size(), 1u);
}

TEST(Dataset, SampleSeedIsXor) {
  const auto cfg = d2d::ScenarioConfig::with_order(4);
  const auto samples = generate_samples(cfg, 5, 0xABCD);
  const auto third = make_sample(cfg, 0xABCD ^ 3);
  EXPECT_TRUE(std::ranges::equal(samples[3].raw_cost.values(), third.raw_cost.values()));
}

TEST(DatasetIo, RoundTrip) {
  const auto samples = generate_samples(d2d::ScenarioConfig::with_order(5), 20, 3);
  std::stringstream ss;
  write_dataset(ss, 3, samples);
  const DatasetFile f = read_dataset(ss);
  EXPECT_EQ(f.header.order, 5);
  EXPECT_EQ(f.header.count, 20u);
  EXPECT_EQ(f.header.scenario_seed, 3u);
  ASSERT_EQ(f.samples.size(), 20u);
  for (std::size_t k = 0; k < 20; ++k) {
    EXPECT_TRUE(std::ranges::equal(f.samples[k].raw_cost.values(), samples[k].raw_cost.values()));
    EXPECT_EQ(f.samples[k].label, samples[k].label);
  }
}

std::string serialized(std::size_t count) {
  std::stringstream ss;
  write_dataset(ss, 9, generate_samples(d2d::ScenarioConfig::with_order(4), count, 9));
  return ss.str();
}

TEST(DatasetIo, CorruptMagicAndVersion) {
  std::string bytes = serialized(2);
  bytes[0] = 'X';
  std::stringstream magic(bytes);
  EXPECT_THROW(read_dataset(magic), FormatError);
  bytes = serialized(2);
  bytes[4] = 2;
  std::stringstream version(bytes);
  EXPECT_THROW(read_dataset(version), FormatError);
}

TEST(DatasetIo, CountMismatchIsTruncation) {
  std::string bytes = serialized(3);
  std::stringstream shortened(bytes.substr(0, bytes.size() - 1));
  EXPECT_THROW(read_dataset(shortened), TruncatedFileError);
  bytes[8] = 4;  // header claims one more record than stored
  std::stringstream overclaimed(bytes);
  EXPECT_THROW(read_dataset(overclaimed), TruncatedFileError);
  std::stringstream header_only(bytes.substr(0, 10));
  EXPECT_THROW(read_dataset(header_only), TruncatedFileError);
}

TEST(DatasetIo, BadLabels) {
  std::string bytes = serialized(1);
  bytes[bytes.size() - 1] = 9;  // index out of range
  std::stringstream range(bytes);
  EXPECT_THROW(read_dataset(range), FormatError);
  bytes = serialized(1);
  bytes[bytes.size() - 1] = bytes[bytes.size() - 2];  // duplicate column
  std::stringstream dup(bytes);
  EXPECT_THROW(read_dataset(dup), FormatError);
}

TEST(Split, SizesAndDeterminism) {
  const auto samples = generate_samples(d2d::ScenarioConfig::with_order(4), 100, 1);
  const Split s = split_dataset(samples, 0.9, 5);
  EXPECT_EQ(s.train.size(), 90u);
  EXPECT_EQ(s.test.size(), 10u);
  const Split again = split_dataset(samples, 0.9, 5);
  for (std::size_t k = 0; k < 10; ++k) EXPECT_EQ(s.test[k].label, again.test[k].label);

  std::multiset<std::vector<double>> in, out;
  for (const auto& x : samples) in.insert({x.raw_cost.values().begin(), x.raw_cost.values().end()});
  for (const auto* part : {&s.train, &s.test}) {
    for (const auto& x : *part) out.insert({x.raw_cost.values().begin(), x.raw_cost.values().end()});
  }
  EXPECT_EQ(in, out);

  const Split one = split_dataset({samples[0]}, 0.9, 5);
  EXPECT_EQ(one.train.size(), 0u);
  EXPECT_EQ(one.test.size(), 1u);
  EXPECT_THROW(split_dataset({}, 0.9, 5), InvalidInputError);
  EXPECT_THROW(split_dataset(samples, 1.0, 5), InvalidInputError);
}

TEST(Normalize, Examples) {
  const auto t = normalize_cost<double>(CostMatrix{{-2, -4}, {-6, -8}});
  ASSERT_EQ(t.shape(), (std::vector<std::size_t>{2, 2}));
  EXPECT_DOUBLE_EQ(t[0], 1.0);
  EXPECT_DOUBLE_EQ(t[1], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(t[2], 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(t[3], 0.0);
  const auto flat = normalize_cost<float>(CostMatrix(3, -7.5));
  for (float v : flat.values()) EXPECT_EQ(v, 0.5f);
}

TEST(Normalize, RangeAndRowArgminPreserved) {
  const auto samples = generate_samples(d2d::ScenarioConfig::with_order(5), 200, 2);
  for (const auto& s : samples) {
    const auto t = normalize_cost<double>(s.raw_cost);
    EXPECT_EQ(*std::ranges::min_element(t.values()), 0.0);
    EXPECT_EQ(*std::ranges::max_element(t.values()), 1.0);
    for (std::size_t i = 0; i < 5; ++i) {
      const auto raw_row = s.raw_cost.values().subspan(i * 5, 5);
      const auto norm_row = t.values().subspan(i * 5, 5);
      EXPECT_EQ(std::ranges::min_element(raw_row) - raw_row.begin(),
                std::ranges::min_element(norm_row) - norm_row.begin());
    }
  }
}

}  // namespace
}  // namespace lsap
