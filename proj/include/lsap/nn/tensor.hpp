// Copyright 2026 The lsapcvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <new>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "lsap/errors.hpp"

namespace lsap::nn {

inline std::string shape_string(std::span<const std::size_t> shape) {
  std::string s = "[";
  for (std::size_t k = 0; k < shape.size(); ++k) {
    if (k) s += ",";
    s += std::to_string(shape[k]);
  }
  return s + "]";
}

/// Cache-line aligned storage. Eigen's vectorized reductions peel a different
/// number of leading scalars depending on the base address, which changes the
/// summation order, so a fixed alignment is what makes training bit-reproducible.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <typename U>
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) noexcept {
    return true;
  }
};

/// Dense row-major array with a runtime shape. The leading dimension is the
/// batch dimension wherever a layer takes a batch.
template <typename T>
class Tensor {
 public:
  using value_type = T;
  using Storage = std::vector<T, AlignedAllocator<T>>;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, T fill = T(0))
      : shape_(std::move(shape)), values_(element_count(shape_), fill) {}
  Tensor(std::vector<std::size_t> shape, const std::vector<T>& values)
      : Tensor(std::move(shape), Storage(values.begin(), values.end())) {}
  Tensor(std::vector<std::size_t> shape, std::initializer_list<T> values)
      : Tensor(std::move(shape), Storage(values)) {}
  Tensor(std::vector<std::size_t> shape, Storage values)
      : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != element_count(shape_)) {
      throw DimensionError("tensor of shape " + shape_string(shape_) + " needs " +
                           std::to_string(element_count(shape_)) + " values, got " +
                           std::to_string(values_.size()));
    }
  }

  static std::size_t element_count(std::span<const std::size_t> shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  }

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, typename Tensor<U>::Storage(values_.begin(), values_.end()));
  }

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t dim(std::size_t k) const { return shape_.at(k); }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  T* data() noexcept { return values_.data(); }
  const T* data() const noexcept { return values_.data(); }
  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }
  T& operator[](std::size_t k) { return values_[k]; }
  const T& operator[](std::size_t k) const { return values_[k]; }

  /// Elements per leading-dimension slice.
  std::size_t stride0() const { return shape_.empty() || shape_[0] == 0 ? 0 : size() / shape_[0]; }

  std::span<T> slice(std::size_t b) { return {values_.data() + b * stride0(), stride0()}; }
  std::span<const T> slice(std::size_t b) const {
    return {values_.data() + b * stride0(), stride0()};
  }

  Tensor reshaped(std::vector<std::size_t> shape) const& {
    return Tensor(std::move(shape), values_);
  }
  Tensor reshaped(std::vector<std::size_t> shape) && {
    return Tensor(std::move(shape), std::move(values_));
  }

  void fill(T v) { std::fill(values_.begin(), values_.end(), v); }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](T v) { return std::isfinite(v); });
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  Storage values_;
};

inline void require_same_shape(std::span<const std::size_t> a, std::span<const std::size_t> b,
                               const char* what) {
  if (!std::equal(a.begin(), a.end(), b.begin(), b.end())) {
    throw DimensionError(std::string(what) + ": shape " + shape_string(a) + " vs " +
                         shape_string(b));
  }
}

}  // namespace lsap::nn
