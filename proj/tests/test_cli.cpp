// Copyright 2026 The lsapcvae Authors
// SPDX-License-Identifier: Apache-2.0

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "lsap/checkpoint.hpp"
#include "lsap/dataset.hpp"
#include "lsap/hungarian.hpp"

namespace lsap {
namespace {

namespace fs = std::filesystem;

struct Result {
  int status = -1;
  std::string out;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(LSAPCVAE_CLI) + " " + args + " 2>/dev/null";
  Result r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  while (std::size_t got = std::fread(buf, 1, sizeof buf, pipe)) r.out.append(buf, got);
  const int raw = ::pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("lsapcvae_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(Cli, GenerateIsDeterministic) {
  const Result a = run("generate --n 4 --count 1000 --seed 7 --out " + path("a.bin"));
  const Result b = run("generate --n 4 --count 1000 --seed 7 --out " + path("b.bin"));
  ASSERT_EQ(a.status, 0) << a.out;
  ASSERT_EQ(b.status, 0);
  EXPECT_EQ(read_text(path("a.bin")), read_text(path("b.bin")));
  EXPECT_NE(a.out.find("# seed = 7"), std::string::npos) << a.out;
  EXPECT_NE(read_text(path("a.bin.cfg")).find("# seed = 7"), std::string::npos);
  const DatasetFile f = load_dataset(path("a.bin"));
  EXPECT_EQ(f.header.count, 1000u);
  EXPECT_EQ(f.header.scenario_seed, 7u);
}

TEST_F(Cli, SolveMatchesBruteForce) {
  const auto sample = make_sample(d2d::ScenarioConfig::with_order(4), 123);
  {
    std::ofstream m(path("m.txt"));
    m.precision(17);
    m << "4\n";
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = 0; j < 4; ++j) m << sample.raw_cost(i, j) << (j == 3 ? '\n' : ' ');
    }
  }
  const Result r = run("solve --solver hungarian " + path("m.txt"));
  ASSERT_EQ(r.status, 0) << r.out;
  const auto at = r.out.find("cost: ");
  ASSERT_NE(at, std::string::npos) << r.out;
  EXPECT_EQ(std::stod(r.out.substr(at + 6)), brute_force_solve(sample.raw_cost).total_cost);
  EXPECT_NE(r.out.find("permutation: "), std::string::npos);
  EXPECT_NE(r.out.find("sum rate: "), std::string::npos);
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("").status, 1);
  EXPECT_EQ(run("frobnicate").status, 1);
  EXPECT_EQ(run("generate --count 10 --out " + path("x.bin") + " --bogus 3").status, 1);
  EXPECT_EQ(run("generate --count 10").status, 1);
  EXPECT_EQ(run("train --dataset " + path("x.bin") + " --checkpoint " + path("c.ck") + " --arch lstm").status, 1);
  EXPECT_EQ(run("generate --n 4 --count 10 --out " + path("x.bin") + " --m 9").status, 1);
  EXPECT_EQ(run("train --dataset " + path("missing.bin") + " --checkpoint " + path("c.ck")).status, 2);
  EXPECT_EQ(run("solve " + path("missing.txt")).status, 2);
  {
    std::ofstream bad(path("bad.txt"));
    bad << "3\n1 2 3\n4 5\n";
  }
  EXPECT_NE(run("solve " + path("bad.txt")).status, 0);
  EXPECT_EQ(run("--help").status, 0);
}

TEST_F(Cli, HelpListsStableFlags) {
  std::string all = run("--help").out;
  for (const char* sub : {"generate", "train", "eval", "solve", "bench", "latent"}) {
    all += run(std::string(sub) + " --help").out;
  }
  for (const char* flag : {"--n", "--m", "--count", "--seed", "--arch", "--preset", "--epochs", "--batch", "--lr",
                           "--kl-weight", "--lr-schedule", "--augment",
                           "--dataset", "--checkpoint", "--out", "--solver", "--z-mode"}) {
    EXPECT_NE(all.find(flag), std::string::npos) << flag;
  }
}

TEST_F(Cli, UntrainedModelScoresLow) {
  ASSERT_EQ(run("generate --n 4 --count 500 --seed 3 --out " + path("d.bin")).status, 0);
  cvae::CvaeModel<float> m(cvae::make_config(cvae::Arch::kHybrid, 4, cvae::Preset::kDesk));
  m.init(5);
  cvae::CheckpointMeta meta;
  meta.init_seed = 5;
  cvae::save_checkpoint(path("u.ck"), m, meta);
  const Result r = run("eval --checkpoint " + path("u.ck") + " --dataset " + path("d.bin") + " --out " + path("u.json"));
  ASSERT_EQ(r.status, 0) << r.out;
  const auto j = nlohmann::json::parse(read_text(path("u.json")));
  EXPECT_EQ(j["sampleCount"], 500);
  EXPECT_LT(j["accuracyPct"].get<double>(), 50.0);
  EXPECT_EQ(j["config"]["arch"], "hybrid");
}

TEST_F(Cli, Pipeline) {
  ASSERT_EQ(run("generate --n 4 --count 400 --seed 9 --out " + path("d.bin")).status, 0);
  const Result t = run("train --dataset " + path("d.bin") + " --arch fnn --epochs 2 --batch 64 --seed 4 --checkpoint " +
                    path("f.ck"));
  ASSERT_EQ(t.status, 0) << t.out;
  EXPECT_NE(t.out.find("# batch = 64"), std::string::npos) << t.out;
  const std::string history = read_text(path("f.ck.history.csv"));
  EXPECT_NE(history.find("epoch,reconLoss,klLoss,totalLoss,heldoutAccuracy\n1,"), std::string::npos) << history;
  EXPECT_NE(history.find("seed"), std::string::npos);
  const auto ck = cvae::load_checkpoint(path("f.ck"));
  EXPECT_EQ(ck.meta.epoch, 2);
  EXPECT_EQ(ck.meta.dataset_seed, 9u);

  const Result e = run("eval --checkpoint " + path("f.ck") + " --dataset " + path("d.bin"));
  ASSERT_EQ(e.status, 0) << e.out;
  const auto j = nlohmann::json::parse(read_text(path("f.ck.eval.json")));
  EXPECT_EQ(j["sampleCount"], 40);  // the held-out 10% of the training split
  EXPECT_EQ(j["config"]["epoch"], 2);

  const Result l = run("latent --checkpoint " + path("f.ck") + " --dataset " + path("d.bin"));
  ASSERT_EQ(l.status, 0) << l.out;
  const std::string csv = read_text(path("f.ck.latent.csv"));
  EXPECT_NE(csv.find("x,y,permutationId\n"), std::string::npos);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4 + 40);

  std::ofstream(path("m.txt")) << "2\n1 2\n2 1\n";
  const Result s = run("solve --solver model --checkpoint " + path("f.ck") + " " + path("m.txt"));
  EXPECT_EQ(s.status, 2) << s.out;  // order mismatch with the n = 4 model

  const Result b = run("bench --solver hungarian --n 8 --count 120");
  ASSERT_EQ(b.status, 0) << b.out;
  EXPECT_NE(b.out.find("p50_us"), std::string::npos);
  EXPECT_EQ(run("bench --solver hungarian --n 8 --count 50").status, 1);
}

}  // namespace
}  // namespace lsap
