// Copyright 2026 The lsapcvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

#include "lsap/assignment.hpp"
#include "lsap/errors.hpp"
#include "lsap/nn/tensor.hpp"

namespace lsap {

/// Row-wise argmax of an n x n score matrix; ties go to the lowest column.
template <typename T>
std::vector<int> decode_rows(std::span<const T> scores, std::size_t n) {
  if (scores.size() != n * n) throw DimensionError("decode_rows: expected n*n scores");
  std::vector<int> cols(n);
  for (std::size_t r = 0; r < n; ++r) {
    const T* row = scores.data() + r * n;
    cols[r] = static_cast<int>(std::max_element(row, row + n) - row);
  }
  return cols;
}

template <typename T>
std::vector<int> decode_rows(const nn::Tensor<T>& yhat) {
  const std::size_t n = yhat.dim(yhat.rank() - 1);
  return decode_rows<T>(yhat.values(), n);
}

/// Percentage of samples whose every row argmax equals the label column.
/// predictions is [B, n, n] (or [B, n*n]); one label per sample.
template <typename T>
double lsap_accuracy(const nn::Tensor<T>& predictions, std::span<const Permutation> labels) {
  if (labels.empty()) throw InvalidInputError("lsap_accuracy: no samples");
  const std::size_t n = labels.front().size();
  if (predictions.size() != labels.size() * n * n) {
    throw DimensionError("lsap_accuracy: prediction count does not match label count");
  }
  std::size_t correct = 0;
  for (std::size_t b = 0; b < labels.size(); ++b) {
    if (labels[b].size() != n) throw DimensionError("lsap_accuracy: labels of mixed order");
    const auto rows = decode_rows<T>(predictions.values().subspan(b * n * n, n * n), n);
    correct += std::equal(rows.begin(), rows.end(), labels[b].map().begin()) ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size()) * 100.0;
}

/// Greedy feasible assignment: visit cells by descending score (ties by row,
/// then column) and take a cell when its row and column are both free.
template <typename T>
Permutation repair_to_permutation(std::span<const T> scores, std::size_t n) {
  if (scores.size() != n * n) throw DimensionError("repair: expected n*n scores");
  std::vector<std::size_t> cells(n * n);
  std::iota(cells.begin(), cells.end(), std::size_t{0});
  std::stable_sort(cells.begin(), cells.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<int> map(n, -1);
  std::vector<char> col_used(n, 0);
  std::size_t assigned = 0;
  for (std::size_t cell : cells) {
    const std::size_t r = cell / n, c = cell % n;
    if (map[r] >= 0 || col_used[c]) continue;
    map[r] = static_cast<int>(c);
    col_used[c] = 1;
    if (++assigned == n) break;
  }
  return Permutation(std::move(map));
}

template <typename T>
Permutation repair_to_permutation(const nn::Tensor<T>& yhat) {
  const std::size_t n = yhat.dim(yhat.rank() - 1);
  return repair_to_permutation<T>(yhat.values(), n);
}

}  // namespace lsap
