// Copyright 2026 The lsapcvae Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "lsap/nn/adam.hpp"
#include "lsap/nn/grad_check.hpp"
#include "lsap/nn/layers.hpp"
#include "lsap/nn/tensor.hpp"

namespace lsap::nn {
namespace {

using Shape = std::vector<std::size_t>;

TEST(Tensor, ShapeAndReshape) {
  Tensor<float> t({2, 3}, 1.5f);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.stride0(), 3u);
  EXPECT_EQ(t.reshaped({3, 2}).shape(), (Shape{3, 2}));
  EXPECT_THROW(t.reshaped({4, 2}), DimensionError);
  EXPECT_THROW(Tensor<float>({2, 2}, std::vector<float>(3)), DimensionError);
  EXPECT_TRUE(t.all_finite());
  t[4] = std::nanf("");
  EXPECT_FALSE(t.all_finite());
}

TEST(Dense, Examples) {
  Dense<double> id(2, 2);
  id.weight = Tensor<double>({2, 2}, {1, 0, 0, 1});
  EXPECT_EQ(id.forward(Tensor<double>({1, 2}, {3, 4})).values()[1], 4.0);
  Dense<double> row(2, 1);
  row.weight = Tensor<double>({1, 2}, {1, 2});
  row.bias = Tensor<double>({1}, {1});
  EXPECT_EQ(row.forward(Tensor<double>({1, 2}, {1, 1}))[0], 4.0);
  Dense<double> zero(3, 2);
  const auto out = zero.forward(Tensor<double>({2, 3}, 7.0));
  for (double v : out.values()) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(zero.forward(Tensor<double>({1, 2})), DimensionError);
}

TEST(Dense, ScalarGradient) {
  // y = w x + b, L = 1/2 (y - t)^2  ->  dL/dw = (y - t) x, dL/db = y - t.
  Dense<double> d(1, 1);
  d.weight[0] = 2.0;
  d.bias[0] = 0.5;
  const Tensor<double> x({1, 1}, {3.0});
  const Tensor<double> y = d.forward(x);
  const Tensor<double> target({1, 1}, {1.0});
  const Tensor<double> dy = l2_loss_backward(y, target);
  const Tensor<double> dx = d.backward(x, dy);
  EXPECT_EQ(d.weight_grad[0], (6.5 - 1.0) * 3.0);
  EXPECT_EQ(d.bias_grad[0], 5.5);
  EXPECT_EQ(dx[0], 5.5 * 2.0);
}

TEST(Conv2D, Examples) {
  Conv2D<double> c(1, 1, 2, 2);
  c.filters.fill(1.0);
  const auto y = c.forward(Tensor<double>({1, 1, 2, 2}, 1.0));
  EXPECT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(y[0], 4.0);
  const auto y3 = c.forward(Tensor<double>({1, 1, 3, 3}, 1.0));
  EXPECT_EQ(y3.shape(), (Shape{1, 1, 2, 2}));
  for (double v : y3.values()) EXPECT_EQ(v, 4.0);

  Conv2D<double> zero(2, 3, 3, 3, 1, Padding::kSame);
  zero.bias = Tensor<double>({3}, {1, 2, 3});
  const auto z = zero.forward(Tensor<double>({1, 2, 4, 4}, 5.0));
  EXPECT_EQ(z.shape(), (Shape{1, 3, 4, 4}));
  for (std::size_t k = 0; k < z.size(); ++k) EXPECT_EQ(z[k], static_cast<double>(k / 16 + 1));

  EXPECT_THROW(c.forward(Tensor<double>({1, 2, 3, 3})), DimensionError);
  Conv2D<double> big(1, 1, 5, 5);
  EXPECT_THROW(big.forward(Tensor<double>({1, 1, 3, 3})), DimensionError);
}

TEST(Conv2D, OneByOneOnesIsIdentity) {
  Conv2D<double> c(1, 1, 1, 1);
  c.filters.fill(1.0);
  Tensor<double> x({2, 1, 3, 4});
  for (std::size_t k = 0; k < x.size(); ++k) x[k] = static_cast<double>(k) - 7.5;
  const auto y = c.forward(x);
  EXPECT_EQ(y.shape(), x.shape());
  for (std::size_t k = 0; k < x.size(); ++k) EXPECT_EQ(y[k], x[k]);
}

TEST(Conv2D, CrossCorrelationAndSamePadding) {
  // No kernel flip: a kernel with a single 1 at (0, 0) under "same" padding
  // on a 3x3 kernel shifts the image by one row and column.
  Conv2D<double> c(1, 1, 3, 3, 1, Padding::kSame);
  c.filters[0] = 1.0;
  Tensor<double> x({1, 1, 3, 3});
  for (std::size_t k = 0; k < 9; ++k) x[k] = static_cast<double>(k + 1);
  const auto y = c.forward(x);
  const std::vector<double> expected{0, 0, 0, 0, 1, 2, 0, 4, 5};
  for (std::size_t k = 0; k < 9; ++k) EXPECT_EQ(y[k], expected[k]);
}

TEST(Conv2D, Geometry) {
  const auto v = conv_geometry(5, 5, 3, 3, 2, Padding::kValid);
  EXPECT_EQ(v.out_h, 2u);
  const auto s = conv_geometry(5, 4, 3, 3, 2, Padding::kSame);
  EXPECT_EQ(s.out_h, 3u);
  EXPECT_EQ(s.out_w, 2u);
}

TEST(Relu, Examples) {
  const Tensor<double> x({3}, {-1, 0, 2});
  const auto y = relu(x);
  EXPECT_EQ(y.values()[0], 0.0);
  EXPECT_EQ(y.values()[1], 0.0);
  EXPECT_EQ(y.values()[2], 2.0);
  const auto mask = relu_mask(x);
  EXPECT_EQ(mask[1], 0.0);
  EXPECT_EQ(mask[2], 1.0);
  const auto dead = relu(Tensor<double>({4}, -3.0));
  for (double v : dead.values()) EXPECT_EQ(v, 0.0);
  const auto twice = relu(relu(x));
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(twice[k], y[k]);
}

TEST(L2Loss, ZeroAtTarget) {
  const Tensor<double> y({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(l2_loss(y, y), 0.0);
  const auto grad = l2_loss_backward(y, y);
  for (double g : grad.values()) EXPECT_EQ(g, 0.0);
  EXPECT_EQ(l2_loss(Tensor<double>({2}, {1, 1}), Tensor<double>({2}, {0, 3})), 2.5);
  EXPECT_THROW(l2_loss(y, Tensor<double>({3})), DimensionError);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  AdamState s(3, {});
  std::vector<double> p{1, -2, 3};
  const std::vector<double> g(3, 0.0);
  adam_step<double>(s, p, g);
  EXPECT_EQ(p, (std::vector<double>{1, -2, 3}));
  EXPECT_EQ(s.step_count, 1);
}

TEST(Adam, FirstStepMagnitude) {
  // Bias-corrected first step: m_hat = g, v_hat = g^2, so the step is
  // lr * |g| / (|g| + eps), within 1e-8 relative of lr for |g| >= 1e-1.
  for (double g : {0.1, -3.0, 250.0}) {
    AdamState s(1, {});
    std::vector<double> p{0.0};
    const std::vector<double> grad{g};
    adam_step<double>(s, p, grad);
    EXPECT_NEAR(std::abs(p[0]), 1e-3 * std::abs(g) / (std::abs(g) + 1e-8), 1e-18);
    EXPECT_EQ(std::signbit(p[0]), !std::signbit(g));
  }
}

TEST(Adam, ZeroBetasGiveSignNormalizedSgd) {
  AdamState s(4, {0.01, 0.0, 0.0, 1e-8});
  std::vector<double> p{1, 2, 3, 4};
  const std::vector<double> g{0.5, -2, 1e-3, 0};
  for (int step = 0; step < 3; ++step) {
    const std::vector<double> before = p;
    adam_step<double>(s, p, g);
    for (std::size_t k = 0; k < 4; ++k) {
      EXPECT_DOUBLE_EQ(p[k], before[k] - 0.01 * g[k] / (std::abs(g[k]) + 1e-8));
    }
  }
}

TEST(Adam, Deterministic) {
  auto run = [] {
    AdamState s(2, {});
    std::vector<float> p{0.5f, -0.25f};
    for (int k = 0; k < 100; ++k) {
      const std::vector<float> g{p[0] * 2.0f - 1.0f, p[1] + 0.3f};
      adam_step<float>(s, p, g);
    }
    return p;
  };
  EXPECT_EQ(run(), run());
}

TEST(Adam, ShapeMismatch) {
  AdamState s(2, {});
  std::vector<double> p(2), g(3);
  EXPECT_THROW(adam_step<double>(s, p, g), DimensionError);
}

// y = W x + b fit with L2 loss: gradient is exact for a quadratic.
struct LinearObjective {
  Dense<double> layer{5, 3};
  Tensor<double> x{{8, 5}}, target{{8, 3}};

  LinearObjective() {
    SplitMix64 rng(1);
    layer.init(rng, 1.0);
    for (auto& v : layer.bias.values()) v = rng.uniform(-1, 1);
    for (auto& v : x.values()) v = rng.uniform(-1, 1);
    for (auto& v : target.values()) v = rng.uniform(-1, 1);
  }
  std::vector<ParamRef<double>> params() { return layer.params(); }
  double loss() { return l2_loss(layer.forward(x), target); }
  double loss_and_grad() {
    layer.weight_grad.fill(0);
    layer.bias_grad.fill(0);
    const auto y = layer.forward(x);
    layer.backward(x, l2_loss_backward(y, target));
    return l2_loss(y, target);
  }
  std::vector<std::uint8_t> kink_signature() { return {}; }
};

// Three dense layers with ReLU between them and a conv front end.
struct ToyNet {
  Conv2D<double> conv{1, 2, 2, 2, 1, Padding::kValid};
  Dense<double> a{18, 12}, b{12, 8}, c{8, 4};
  Tensor<double> x{{6, 1, 4, 4}}, target{{6, 4}};
  double corrupt = 0.0;

  explicit ToyNet(std::uint64_t seed) {
    SplitMix64 rng(seed);
    conv.init(rng);
    a.init(rng);
    b.init(rng);
    c.init(rng);
    for (auto* layer : {&a, &b, &c}) for (auto& v : layer->bias.values()) v = rng.uniform(-0.1, 0.1);
    for (auto& v : x.values()) v = rng.uniform(0, 1);
    for (auto& v : target.values()) v = rng.uniform(0, 1);
  }
  std::vector<ParamRef<double>> params() {
    std::vector<ParamRef<double>> out = conv.params();
    for (auto* layer : {&a, &b, &c}) for (auto p : layer->params()) out.push_back(p);
    return out;
  }
  struct Pass {
    Tensor<double> p0, h0, p1, h1, p2, h2, y;
  };
  Pass forward() {
    Pass s;
    s.p0 = conv.forward(x);
    s.h0 = relu(s.p0).reshaped({6, 18});
    s.p1 = a.forward(s.h0);
    s.h1 = relu(s.p1);
    s.p2 = b.forward(s.h1);
    s.h2 = relu(s.p2);
    s.y = c.forward(s.h2);
    last_ = s;
    return s;
  }
  double loss() { return l2_loss(forward().y, target); }
  double loss_and_grad() {
    for (auto& p : params()) p.grad->fill(0);
    const Pass s = forward();
    auto g = l2_loss_backward(s.y, target);
    g = c.backward(s.h2, g);
    g = relu_backward(s.p2, std::move(g));
    g = b.backward(s.h1, g);
    g = relu_backward(s.p1, std::move(g));
    g = a.backward(s.h0, g);
    g = relu_backward(s.p0, g.reshaped(s.p0.shape()));
    conv.backward(x, g);
    a.weight_grad[0] += corrupt;
    return l2_loss(s.y, target);
  }
  std::vector<std::uint8_t> kink_signature() {
    std::vector<std::uint8_t> sig;
    for (const auto* t : {&last_.p0, &last_.p1, &last_.p2}) {
      for (double v : t->values()) sig.push_back(v > 0);
    }
    return sig;
  }
  Pass last_;
};

TEST(GradCheck, LinearModelIsExact) {
  LinearObjective o;
  const auto r = grad_check(o);
  EXPECT_EQ(r.checked, 18u);
  EXPECT_LE(r.max_relative_error, 1e-8);
}

TEST(GradCheck, ToyReluNet) {
  ToyNet net(3);
  const auto r = grad_check(net, {.coordinates = 400});
  EXPECT_GE(r.checked, 200u);
  EXPECT_LE(r.max_relative_error, 1e-4);
}

TEST(GradCheck, CorruptedGradientIsCaught) {
  ToyNet net(3);
  net.corrupt = 0.05;
  GradCheckOptions all;
  all.coordinates = 100000;  // every coordinate, so the corrupted one is included
  EXPECT_GT(grad_check(net, all).max_relative_error, 1e-2);
}

}  // namespace
}  // namespace lsap::nn
