// Copyright 2026 The lsapcvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <cmath>
#include <string>
#include <vector>

#include "lsap/errors.hpp"
#include "lsap/nn/tensor.hpp"
#include "lsap/rng.hpp"

namespace lsap::nn {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;
template <typename T>
using ConstVectorMap = Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>;

/// A trainable tensor and its gradient accumulator.
template <typename T>
struct ParamRef {
  Tensor<T>* value;
  Tensor<T>* grad;
};

/// Fully connected layer y = W x + b over a batch x of shape [B, in].
template <typename T>
struct Dense {
  Tensor<T> weight;  // [out, in]
  Tensor<T> bias;    // [out]
  Tensor<T> weight_grad;
  Tensor<T> bias_grad;

  Dense() = default;
  Dense(std::size_t in, std::size_t out)
      : weight({out, in}), bias({out}), weight_grad({out, in}), bias_grad({out}) {}

  template <typename U>
  explicit Dense(const Dense<U>& other)
      : weight(other.weight.template cast<T>()),
        bias(other.bias.template cast<T>()),
        weight_grad(other.weight_grad.template cast<T>()),
        bias_grad(other.bias_grad.template cast<T>()) {}

  std::size_t in_features() const { return weight.dim(1); }
  std::size_t out_features() const { return weight.dim(0); }

  /// Kaiming-uniform: U(-g sqrt(3 / fan_in), +g sqrt(3 / fan_in)), zero bias.
  /// g = sqrt(2) for layers feeding a ReLU, 1 for linear heads.
  void init(SplitMix64& rng, double gain = std::sqrt(2.0)) {
    const double bound = gain * std::sqrt(3.0 / static_cast<double>(in_features()));
    for (auto& w : weight.values()) w = static_cast<T>(rng.uniform(-bound, bound));
    bias.fill(T(0));
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    const std::size_t in = in_features(), out = out_features();
    if (x.empty() || x.size() % in != 0 || x.stride0() != in) {
      throw DimensionError("dense: input " + shape_string(x.shape()) + " does not have " +
                           std::to_string(in) + " features");
    }
    const std::size_t batch = x.size() / in;
    Tensor<T> y({batch, out});
    MatrixMap<T> Y(y.data(), batch, out);
    Y.noalias() = ConstMatrixMap<T>(x.data(), batch, in) *
                  ConstMatrixMap<T>(weight.data(), out, in).transpose();
    Y.rowwise() += ConstVectorMap<T>(bias.data(), out);
    return y;
  }

  /// Accumulates dL/dW and dL/db; returns dL/dx.
  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& dy) {
    const std::size_t in = in_features(), out = out_features();
    const std::size_t batch = x.size() / in;
    if (dy.size() != batch * out) throw DimensionError("dense backward: gradient shape mismatch");
    ConstMatrixMap<T> X(x.data(), batch, in);
    ConstMatrixMap<T> dY(dy.data(), batch, out);
    MatrixMap<T>(weight_grad.data(), out, in).noalias() += dY.transpose() * X;
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias_grad.data(), out) += dY.colwise().sum();
    Tensor<T> dx({batch, in});
    MatrixMap<T>(dx.data(), batch, in).noalias() =
        dY * ConstMatrixMap<T>(weight.data(), out, in);
    return dx;
  }

  std::vector<ParamRef<T>> params() { return {{&weight, &weight_grad}, {&bias, &bias_grad}}; }
};

enum class Padding { kValid, kSame };

inline const char* to_string(Padding p) { return p == Padding::kValid ? "valid" : "same"; }

struct ConvGeometry {
  std::size_t out_h, out_w, pad_top, pad_left;
};

/// Valid: floor((H - k) / s) + 1. Same: ceil(H / s), zero padding split
/// with the smaller half before.
inline ConvGeometry conv_geometry(std::size_t h, std::size_t w, std::size_t kh, std::size_t kw,
                                  std::size_t stride, Padding padding) {
  auto axis = [&](std::size_t size, std::size_t k, std::size_t& out, std::size_t& pad_before) {
    if (padding == Padding::kValid) {
      if (size < k) throw DimensionError("conv2d: output dimension < 1");
      out = (size - k) / stride + 1;
      pad_before = 0;
    } else {
      out = (size + stride - 1) / stride;
      const std::size_t needed = (out - 1) * stride + k;
      pad_before = needed > size ? (needed - size) / 2 : 0;
    }
    if (out < 1) throw DimensionError("conv2d: output dimension < 1");
  };
  ConvGeometry g{};
  axis(h, kh, g.out_h, g.pad_top);
  axis(w, kw, g.out_w, g.pad_left);
  return g;
}

/// 2-D cross-correlation (no kernel flip) over [B, C, H, W] inputs.
template <typename T>
struct Conv2D {
  Tensor<T> filters;  // [out_channels, in_channels, kh, kw]
  Tensor<T> bias;     // [out_channels]
  Tensor<T> filters_grad;
  Tensor<T> bias_grad;
  std::size_t stride = 1;
  Padding padding = Padding::kValid;

  Conv2D() = default;
  Conv2D(std::size_t in_channels, std::size_t out_channels, std::size_t kh, std::size_t kw,
         std::size_t stride_ = 1, Padding padding_ = Padding::kValid)
      : filters({out_channels, in_channels, kh, kw}),
        bias({out_channels}),
        filters_grad({out_channels, in_channels, kh, kw}),
        bias_grad({out_channels}),
        stride(stride_),
        padding(padding_) {
    if (kh < 1 || kw < 1 || stride < 1) throw DimensionError("conv2d: kernel and stride must be >= 1");
  }

  template <typename U>
  explicit Conv2D(const Conv2D<U>& other)
      : filters(other.filters.template cast<T>()),
        bias(other.bias.template cast<T>()),
        filters_grad(other.filters_grad.template cast<T>()),
        bias_grad(other.bias_grad.template cast<T>()),
        stride(other.stride),
        padding(other.padding) {}

  std::size_t out_channels() const { return filters.dim(0); }
  std::size_t in_channels() const { return filters.dim(1); }
  std::size_t kernel_h() const { return filters.dim(2); }
  std::size_t kernel_w() const { return filters.dim(3); }
  std::size_t patch_size() const { return in_channels() * kernel_h() * kernel_w(); }

  void init(SplitMix64& rng, double gain = std::sqrt(2.0)) {
    const double bound = gain * std::sqrt(3.0 / static_cast<double>(patch_size()));
    for (auto& w : filters.values()) w = static_cast<T>(rng.uniform(-bound, bound));
    bias.fill(T(0));
  }

  using Geometry = ConvGeometry;

  Geometry geometry(std::size_t h, std::size_t w) const {
    return conv_geometry(h, w, kernel_h(), kernel_w(), stride, padding);
  }

  std::vector<std::size_t> output_shape(std::size_t h, std::size_t w) const {
    const auto g = geometry(h, w);
    return {out_channels(), g.out_h, g.out_w};
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    check_input(x);
    const std::size_t batch = x.dim(0), h = x.dim(2), w = x.dim(3);
    const auto g = geometry(h, w);
    const std::size_t positions = g.out_h * g.out_w;
    Tensor<T> y({batch, out_channels(), g.out_h, g.out_w});
    RowMatrix<T> cols(patch_size(), positions);
    ConstMatrixMap<T> W(filters.data(), out_channels(), patch_size());
    for (std::size_t b = 0; b < batch; ++b) {
      im2col(x.data() + b * x.stride0(), h, w, g, cols);
      MatrixMap<T> Y(y.data() + b * y.stride0(), out_channels(), positions);
      Y.noalias() = W * cols;
      Y.colwise() += Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(bias.data(), out_channels());
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& dy) {
    check_input(x);
    const std::size_t batch = x.dim(0), h = x.dim(2), w = x.dim(3);
    const auto g = geometry(h, w);
    const std::size_t positions = g.out_h * g.out_w;
    if (dy.size() != batch * out_channels() * positions) {
      throw DimensionError("conv2d backward: gradient shape mismatch");
    }
    Tensor<T> dx(x.shape());
    RowMatrix<T> cols(patch_size(), positions);
    RowMatrix<T> dcols(patch_size(), positions);
    ConstMatrixMap<T> W(filters.data(), out_channels(), patch_size());
    MatrixMap<T> dW(filters_grad.data(), out_channels(), patch_size());
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> db(bias_grad.data(), out_channels());
    for (std::size_t b = 0; b < batch; ++b) {
      im2col(x.data() + b * x.stride0(), h, w, g, cols);
      ConstMatrixMap<T> dY(dy.data() + b * out_channels() * positions, out_channels(), positions);
      dW.noalias() += dY * cols.transpose();
      db += dY.rowwise().sum();
      dcols.noalias() = W.transpose() * dY;
      col2im(dcols, h, w, g, dx.data() + b * dx.stride0());
    }
    return dx;
  }

  std::vector<ParamRef<T>> params() { return {{&filters, &filters_grad}, {&bias, &bias_grad}}; }

 private:
  void check_input(const Tensor<T>& x) const {
    if (x.rank() != 4 || x.dim(1) != in_channels()) {
      throw DimensionError("conv2d: expected [B," + std::to_string(in_channels()) +
                           ",H,W] input, got " + shape_string(x.shape()));
    }
  }

  // Row r = (c, ki, kj) of cols holds the input value under kernel tap
  // (ki, kj) of channel c for every output position.
  void im2col(const T* src, std::size_t h, std::size_t w, const Geometry& g,
              RowMatrix<T>& cols) const {
    const std::size_t kh = kernel_h(), kw = kernel_w();
    std::size_t r = 0;
    for (std::size_t c = 0; c < in_channels(); ++c) {
      for (std::size_t ki = 0; ki < kh; ++ki) {
        for (std::size_t kj = 0; kj < kw; ++kj, ++r) {
          std::size_t p = 0;
          for (std::size_t oi = 0; oi < g.out_h; ++oi) {
            const auto ii = static_cast<std::ptrdiff_t>(oi * stride + ki) -
                            static_cast<std::ptrdiff_t>(g.pad_top);
            for (std::size_t oj = 0; oj < g.out_w; ++oj, ++p) {
              const auto jj = static_cast<std::ptrdiff_t>(oj * stride + kj) -
                              static_cast<std::ptrdiff_t>(g.pad_left);
              const bool inside = ii >= 0 && jj >= 0 && ii < static_cast<std::ptrdiff_t>(h) &&
                                  jj < static_cast<std::ptrdiff_t>(w);
              cols(r, p) = inside ? src[(c * h + ii) * w + jj] : T(0);
            }
          }
        }
      }
    }
  }

  void col2im(const RowMatrix<T>& dcols, std::size_t h, std::size_t w, const Geometry& g,
              T* dst) const {
    const std::size_t kh = kernel_h(), kw = kernel_w();
    std::size_t r = 0;
    for (std::size_t c = 0; c < in_channels(); ++c) {
      for (std::size_t ki = 0; ki < kh; ++ki) {
        for (std::size_t kj = 0; kj < kw; ++kj, ++r) {
          std::size_t p = 0;
          for (std::size_t oi = 0; oi < g.out_h; ++oi) {
            const auto ii = static_cast<std::ptrdiff_t>(oi * stride + ki) -
                            static_cast<std::ptrdiff_t>(g.pad_top);
            for (std::size_t oj = 0; oj < g.out_w; ++oj, ++p) {
              const auto jj = static_cast<std::ptrdiff_t>(oj * stride + kj) -
                              static_cast<std::ptrdiff_t>(g.pad_left);
              if (ii >= 0 && jj >= 0 && ii < static_cast<std::ptrdiff_t>(h) &&
                  jj < static_cast<std::ptrdiff_t>(w)) {
                dst[(c * h + ii) * w + jj] += dcols(r, p);
              }
            }
          }
        }
      }
    }
  }
};

template <typename T>
Tensor<T> relu(Tensor<T> x) {
  for (auto& v : x.values()) v = v > T(0) ? v : T(0);
  return x;
}

/// 1 where the pre-activation is strictly positive, else 0.
template <typename T>
Tensor<T> relu_mask(const Tensor<T>& pre) {
  Tensor<T> mask(pre.shape());
  for (std::size_t k = 0; k < pre.size(); ++k) mask[k] = pre[k] > T(0) ? T(1) : T(0);
  return mask;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& pre, Tensor<T> dy) {
  if (dy.size() != pre.size()) throw DimensionError("relu backward: shape mismatch");
  for (std::size_t k = 0; k < dy.size(); ++k) {
    if (!(pre[k] > T(0))) dy[k] = T(0);
  }
  return dy;
}

/// 0.5 * ||yhat - y||^2, accumulated in double.
template <typename T>
double l2_loss(const Tensor<T>& yhat, const Tensor<T>& y) {
  if (yhat.size() != y.size()) throw DimensionError("l2 loss: shape mismatch");
  double total = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    const double d = static_cast<double>(yhat[k]) - static_cast<double>(y[k]);
    total += d * d;
  }
  return 0.5 * total;
}

/// d/dyhat of l2_loss, times `scale`.
template <typename T>
Tensor<T> l2_loss_backward(const Tensor<T>& yhat, const Tensor<T>& y, T scale = T(1)) {
  if (yhat.size() != y.size()) throw DimensionError("l2 loss: shape mismatch");
  Tensor<T> g(yhat.shape());
  for (std::size_t k = 0; k < y.size(); ++k) g[k] = scale * (yhat[k] - y[k]);
  return g;
}

}  // namespace lsap::nn
