// Copyright 2026 The lsapcvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "lsap/errors.hpp"

namespace lsap {

/// Square cost matrix, row-major. Entry (i, j) is the cost of giving column j
/// to row i. The container itself accepts any value; solvers reject
/// non-finite entries.
class CostMatrix {
 public:
  CostMatrix() = default;
  explicit CostMatrix(std::size_t n, double fill = 0.0) : n_(n), values_(n * n, fill) {
    if (n == 0) throw DimensionError("cost matrix order must be >= 1");
  }
  CostMatrix(std::size_t n, std::vector<double> values) : n_(n), values_(std::move(values)) {
    if (n == 0) throw DimensionError("cost matrix order must be >= 1");
    if (values_.size() != n * n) {
      throw DimensionError("cost matrix of order " + std::to_string(n) + " needs " +
                           std::to_string(n * n) + " entries, got " +
                           std::to_string(values_.size()));
    }
  }
  CostMatrix(std::initializer_list<std::initializer_list<double>> rows) : n_(rows.size()) {
    if (n_ == 0) throw DimensionError("cost matrix order must be >= 1");
    values_.reserve(n_ * n_);
    for (const auto& row : rows) {
      if (row.size() != n_) throw DimensionError("cost matrix must be square");
      values_.insert(values_.end(), row.begin(), row.end());
    }
  }

  std::size_t order() const noexcept { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values_[i * n_ + j]; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> row(std::size_t i) const { return {values_.data() + i * n_, n_}; }

  bool all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
  }

  void require_finite() const {
    for (std::size_t k = 0; k < values_.size(); ++k) {
      if (!std::isfinite(values_[k])) {
        throw InvalidInputError("cost entry (" + std::to_string(k / n_) + ", " +
                                std::to_string(k % n_) + ") is not finite");
      }
    }
  }

  friend bool operator==(const CostMatrix&, const CostMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> values_;
};

/// A bijection on {0, ..., n-1}: row i is assigned column map[i].
class Permutation {
 public:
  Permutation() = default;
  explicit Permutation(std::vector<int> map) : map_(std::move(map)) {
    if (!is_bijection(map_)) throw InvalidInputError("sequence is not a permutation");
  }
  Permutation(std::initializer_list<int> map) : Permutation(std::vector<int>(map)) {}

  static Permutation identity(std::size_t n) {
    std::vector<int> map(n);
    for (std::size_t i = 0; i < n; ++i) map[i] = static_cast<int>(i);
    return Permutation(std::move(map));
  }

  static bool is_bijection(std::span<const int> map) {
    std::vector<char> seen(map.size(), 0);
    for (int c : map) {
      if (c < 0 || static_cast<std::size_t>(c) >= map.size() || seen[c]) return false;
      seen[c] = 1;
    }
    return true;
  }

  std::size_t size() const noexcept { return map_.size(); }
  int operator[](std::size_t i) const { return map_[i]; }
  std::span<const int> map() const noexcept { return map_; }

  /// inverse()[j] is the row assigned column j.
  std::vector<int> inverse() const {
    std::vector<int> inv(map_.size());
    for (std::size_t i = 0; i < map_.size(); ++i) inv[map_[i]] = static_cast<int>(i);
    return inv;
  }

  /// Position of this permutation in lexicographic order (Lehmer code), in [0, n!).
  std::uint64_t lexicographic_rank() const {
    std::uint64_t rank = 0;
    const std::size_t n = map_.size();
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t smaller = 0;
      for (std::size_t k = i + 1; k < n; ++k) smaller += map_[k] < map_[i] ? 1 : 0;
      rank = rank * (n - i) + smaller;
    }
    return rank;
  }

  friend bool operator==(const Permutation&, const Permutation&) = default;
  friend auto operator<=>(const Permutation&, const Permutation&) = default;

 private:
  std::vector<int> map_;
};

/// Binary n x n matrix x_ij. Holds whatever it is given; validate_assignment
/// checks the row/column/binary constraints.
class AssignmentMatrix {
 public:
  AssignmentMatrix() = default;
  explicit AssignmentMatrix(std::size_t n) : n_(n), values_(n * n, 0) {}
  AssignmentMatrix(std::initializer_list<std::initializer_list<int>> rows) : n_(rows.size()) {
    for (const auto& row : rows) {
      if (row.size() != n_) throw DimensionError("assignment matrix must be square");
      values_.insert(values_.end(), row.begin(), row.end());
    }
  }

  static AssignmentMatrix one_hot(const Permutation& perm) {
    AssignmentMatrix m(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) m(i, perm[i]) = 1;
    return m;
  }

  std::size_t order() const noexcept { return n_; }
  int operator()(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }
  int& operator()(std::size_t i, std::size_t j) { return values_[i * n_ + j]; }

 private:
  std::size_t n_ = 0;
  std::vector<int> values_;
};

struct SolveResult {
  Permutation permutation;
  double total_cost = 0.0;
};

/// Sum whose value depends only on the multiset of terms: terms are added in
/// ascending order of magnitude (ties by value). Two assignments selecting
/// the same entries in different rows therefore get bit-identical totals,
/// and negating every term negates the result exactly.
inline double canonical_sum(std::vector<double> terms) {
  std::sort(terms.begin(), terms.end(), [](double a, double b) {
    const double fa = std::fabs(a), fb = std::fabs(b);
    return fa != fb ? fa < fb : a < b;
  });
  double total = 0.0;
  for (double t : terms) total += t;
  return total;
}

/// Total cost sum_i c(i, perm[i]).
inline double assignment_cost(const CostMatrix& cost, const Permutation& perm) {
  if (perm.size() != cost.order()) {
    throw DimensionError("permutation length " + std::to_string(perm.size()) +
                         " does not match cost order " + std::to_string(cost.order()));
  }
  std::vector<double> terms(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) terms[i] = cost(i, perm[i]);
  return canonical_sum(std::move(terms));
}

/// Returns the permutation encoded by a 0/1 matrix whose rows and columns
/// each sum to one. Rows are checked before columns.
inline Permutation validate_assignment(const AssignmentMatrix& matrix) {
  const std::size_t n = matrix.order();
  if (n == 0) throw DimensionError("empty assignment matrix");
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const int v = matrix(i, j);
      if (v != 0 && v != 1) {
        throw InvalidInputError("entry (" + std::to_string(i) + ", " + std::to_string(j) +
                                ") is not binary");
      }
    }
  }
  std::vector<int> map(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    int sum = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (matrix(i, j) == 1) map[i] = static_cast<int>(j);
      sum += matrix(i, j);
    }
    if (sum != 1) throw InfeasibleAssignmentError(InfeasibleAssignmentError::Axis::kRow, i, sum);
  }
  for (std::size_t j = 0; j < n; ++j) {
    int sum = 0;
    for (std::size_t i = 0; i < n; ++i) sum += matrix(i, j);
    if (sum != 1) {
      throw InfeasibleAssignmentError(InfeasibleAssignmentError::Axis::kColumn, j, sum);
    }
  }
  return Permutation(std::move(map));
}

}  // namespace lsap
