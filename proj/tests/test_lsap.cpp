// Copyright 2026 The lsapcvae Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "lsap/assignment.hpp"
#include "lsap/hungarian.hpp"
#include "lsap/rng.hpp"

namespace lsap {
namespace {

CostMatrix random_matrix(std::size_t n, SplitMix64& rng) {
  CostMatrix c(n);
  for (double& v : c.values()) v = rng.uniform();
  return c;
}

TEST(Hungarian, OneByOne) {
  const auto r = hungarian_solve(CostMatrix{{5}});
  EXPECT_EQ(r.permutation, Permutation({0}));
  EXPECT_EQ(r.total_cost, 5.0);
}

TEST(Hungarian, TwoByTwo) {
  const auto r = hungarian_solve(CostMatrix{{1, 2}, {2, 1}});
  EXPECT_EQ(r.permutation, Permutation({0, 1}));
  EXPECT_EQ(r.total_cost, 2.0);
}

// Matrix and optimum from tests/oracles/lsap_reference.py (exact rational
// enumeration of all 120 permutations).
TEST(Hungarian, SeededFiveByFiveMatchesEnumeration) {
  SplitMix64 rng(42);
  const CostMatrix c = random_matrix(5, rng);
  EXPECT_EQ(c(0, 0), 0.7415648787718233);
  const auto h = hungarian_solve(c);
  const auto b = brute_force_solve(c);
  EXPECT_EQ(h.total_cost, b.total_cost);
  EXPECT_EQ(b.permutation, Permutation({2, 1, 0, 3, 4}));
  EXPECT_NEAR(b.total_cost, 0.8694966221828587, 1e-15);
}

TEST(Hungarian, RejectsNonFinite) {
  CostMatrix c{{1, 2}, {3, 4}};
  c.values()[2] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(hungarian_solve(c), InvalidInputError);
  c.values()[2] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(hungarian_solve(c), InvalidInputError);
}

TEST(Hungarian, MatchesBruteForceOnRandomMatrices) {
  SplitMix64 rng(7);
  for (std::size_t n = 2; n <= 7; ++n) {
    for (int trial = 0; trial < 200; ++trial) {
      const CostMatrix c = random_matrix(n, rng);
      const auto h = hungarian_solve(c);
      ASSERT_EQ(h.total_cost, brute_force_solve(c).total_cost) << "n=" << n << " trial=" << trial;
      ASSERT_EQ(assignment_cost(c, h.permutation), h.total_cost);
    }
  }
}

TEST(Hungarian, MatchesBruteForceWithHeavyTies) {
  SplitMix64 rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng.below(6);
    CostMatrix c(n);
    for (double& v : c.values()) v = static_cast<double>(rng.below(3)) - 1.0;
    ASSERT_EQ(hungarian_solve(c).total_cost, brute_force_solve(c).total_cost);
  }
}

TEST(Hungarian, RowShiftKeepsOptimality) {
  SplitMix64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(6);
    CostMatrix c = random_matrix(n, rng);
    const double before = hungarian_solve(c).total_cost;
    const std::size_t row = rng.below(n);
    for (std::size_t j = 0; j < n; ++j) c.values()[row * n + j] += 3.25;
    const auto after = hungarian_solve(c);
    EXPECT_EQ(after.total_cost, brute_force_solve(c).total_cost);
    EXPECT_NEAR(after.total_cost, before + 3.25, 1e-12);
  }
}

TEST(Hungarian, LargeOrderProducesBijection) {
  SplitMix64 rng(10);
  const CostMatrix c = random_matrix(64, rng);
  const auto r = hungarian_solve(c);
  EXPECT_TRUE(Permutation::is_bijection(r.permutation.map()));
  // Any single swap cannot improve an optimum.
  for (std::size_t a = 0; a < 64; ++a) {
    for (std::size_t b = a + 1; b < 64; ++b) {
      const int ja = r.permutation[a], jb = r.permutation[b];
      EXPECT_GE(c(a, jb) + c(b, ja) - c(a, ja) - c(b, jb), -1e-12);
    }
  }
}

TEST(BruteForce, ExamplesAndTieBreak) {
  EXPECT_EQ(brute_force_solve(CostMatrix{{5}}).total_cost, 5.0);
  const auto zeros = brute_force_solve(CostMatrix(3));
  EXPECT_EQ(zeros.permutation, Permutation({0, 1, 2}));
  EXPECT_EQ(zeros.total_cost, 0.0);
  const auto two = brute_force_solve(CostMatrix{{1, 2}, {2, 1}});
  EXPECT_EQ(two.permutation, Permutation({0, 1}));
  EXPECT_EQ(two.total_cost, 2.0);
  // [0,1,2] and [1,0,2] both cost 0; the lexicographically first wins.
  const auto tie = brute_force_solve(CostMatrix{{0, 0, 1}, {0, 0, 1}, {1, 1, 0}});
  EXPECT_EQ(tie.permutation, Permutation({0, 1, 2}));
}

TEST(BruteForce, SizeCap) {
  EXPECT_NO_THROW(brute_force_solve(CostMatrix(kBruteForceMaxOrder)));
  EXPECT_THROW(brute_force_solve(CostMatrix(kBruteForceMaxOrder + 1)), SizeLimitError);
}

TEST(AssignmentCost, Examples) {
  const CostMatrix c{{1, 2}, {3, 4}};
  EXPECT_EQ(assignment_cost(c, Permutation({1, 0})), 5.0);
  EXPECT_EQ(assignment_cost(c, Permutation({0, 1})), 5.0);
  EXPECT_EQ(assignment_cost(CostMatrix(4), Permutation({3, 1, 0, 2})), 0.0);
  EXPECT_THROW(assignment_cost(c, Permutation({0, 1, 2})), DimensionError);
}

TEST(CanonicalSum, DependsOnlyOnTheMultiset) {
  SplitMix64 rng(11);
  std::vector<double> terms(9);
  for (double& t : terms) t = (rng.uniform() - 0.5) * std::pow(10.0, static_cast<double>(rng.below(12)) - 6);
  const double reference = canonical_sum(terms);
  for (int k = 0; k < 50; ++k) {
    shuffle(std::span(terms), rng);
    EXPECT_EQ(canonical_sum(terms), reference);
  }
}

TEST(ValidateAssignment, Examples) {
  EXPECT_EQ(validate_assignment(AssignmentMatrix{{1, 0}, {0, 1}}), Permutation({0, 1}));
  EXPECT_EQ(validate_assignment(AssignmentMatrix{{0, 1}, {1, 0}}), Permutation({1, 0}));
  try {
    validate_assignment(AssignmentMatrix{{1, 1}, {0, 0}});
    FAIL() << "expected InfeasibleAssignmentError";
  } catch (const InfeasibleAssignmentError& e) {
    EXPECT_EQ(e.axis(), InfeasibleAssignmentError::Axis::kRow);
    EXPECT_EQ(e.index(), 0u);
  }
  try {
    validate_assignment(AssignmentMatrix{{1, 0}, {1, 0}});
    FAIL() << "expected InfeasibleAssignmentError";
  } catch (const InfeasibleAssignmentError& e) {
    EXPECT_EQ(e.axis(), InfeasibleAssignmentError::Axis::kColumn);
    EXPECT_EQ(e.index(), 0u);
  }
  EXPECT_THROW(validate_assignment(AssignmentMatrix{{2, 0}, {0, 1}}), InvalidInputError);
}

TEST(ValidateAssignment, OneHotRoundTrip) {
  SplitMix64 rng(12);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng.below(12);
    std::vector<int> map(n);
    std::iota(map.begin(), map.end(), 0);
    shuffle(std::span(map), rng);
    const Permutation p(map);
    ASSERT_EQ(validate_assignment(AssignmentMatrix::one_hot(p)), p);
  }
}

TEST(Permutation, RejectsNonBijection) {
  EXPECT_THROW(Permutation({0, 0}), InvalidInputError);
  EXPECT_THROW(Permutation({0, 2}), InvalidInputError);
  EXPECT_THROW(Permutation({-1, 0}), InvalidInputError);
}

TEST(Permutation, InverseAndRank) {
  const Permutation p({2, 0, 1});
  EXPECT_EQ(p.inverse(), (std::vector<int>{1, 2, 0}));
  std::vector<int> map{0, 1, 2, 3};
  std::uint64_t expected = 0;
  do {
    EXPECT_EQ(Permutation(map).lexicographic_rank(), expected++);
  } while (std::next_permutation(map.begin(), map.end()));
  EXPECT_EQ(expected, 24u);
}

}  // namespace
}  // namespace lsap
