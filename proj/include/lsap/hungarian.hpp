// Copyright 2026 The lsapcvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "lsap/assignment.hpp"

namespace lsap {

/// Exact O(n^3) Hungarian method (shortest augmenting paths with row and
/// column potentials). Rows are inserted one at a time; each insertion runs a
/// Dijkstra-like scan over reduced costs c(i,j) - u(i) - v(j) and augments
/// along the cheapest alternating path. Always minimizes; callers wanting a
/// maximum negate the matrix first.
///
/// Throws InvalidInputError if any entry is not finite.
inline SolveResult hungarian_solve(const CostMatrix& cost) {
  cost.require_finite();
  const std::size_t n = cost.order();
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // 1-based, index 0 is a virtual column used as the root of each search.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> row_of_col(n + 1, 0);
  std::vector<std::size_t> prev_col(n + 1, 0);
  std::vector<double> min_slack(n + 1);
  std::vector<char> visited(n + 1);

  for (std::size_t row = 1; row <= n; ++row) {
    row_of_col[0] = row;
    std::size_t col0 = 0;
    std::fill(min_slack.begin(), min_slack.end(), kInf);
    std::fill(visited.begin(), visited.end(), 0);
    do {
      visited[col0] = 1;
      const std::size_t i0 = row_of_col[col0];
      double delta = kInf;
      std::size_t col1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (visited[j]) continue;
        const double reduced = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (reduced < min_slack[j]) {
          min_slack[j] = reduced;
          prev_col[j] = col0;
        }
        if (min_slack[j] < delta) {
          delta = min_slack[j];
          col1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (visited[j]) {
          u[row_of_col[j]] += delta;
          v[j] -= delta;
        } else {
          min_slack[j] -= delta;
        }
      }
      col0 = col1;
    } while (row_of_col[col0] != 0);

    // Flip the augmenting path back to the root.
    do {
      const std::size_t col1 = prev_col[col0];
      row_of_col[col0] = row_of_col[col1];
      col0 = col1;
    } while (col0 != 0);
  }

  std::vector<int> map(n);
  for (std::size_t j = 1; j <= n; ++j) map[row_of_col[j] - 1] = static_cast<int>(j - 1);
  Permutation perm(std::move(map));
  const double total = assignment_cost(cost, perm);
  return {std::move(perm), total};
}

inline constexpr std::size_t kBruteForceMaxOrder = 9;

/// Exhaustive search over all n! permutations in lexicographic order. Among
/// equal-cost optima the lexicographically smallest permutation wins.
/// Test oracle only; refuses n > kBruteForceMaxOrder.
inline SolveResult brute_force_solve(const CostMatrix& cost) {
  cost.require_finite();
  const std::size_t n = cost.order();
  if (n > kBruteForceMaxOrder) {
    throw SizeLimitError("brute force is capped at n = " + std::to_string(kBruteForceMaxOrder) +
                         ", got n = " + std::to_string(n));
  }
  std::vector<int> map(n);
  std::iota(map.begin(), map.end(), 0);
  std::vector<int> best = map;
  double best_cost = std::numeric_limits<double>::infinity();
  std::vector<double> terms(n);
  do {
    for (std::size_t i = 0; i < n; ++i) terms[i] = cost(i, map[i]);
    const double c = canonical_sum(terms);
    if (c < best_cost) {
      best_cost = c;
      best = map;
    }
  } while (std::next_permutation(map.begin(), map.end()));
  return {Permutation(std::move(best)), best_cost};
}

}  // namespace lsap
