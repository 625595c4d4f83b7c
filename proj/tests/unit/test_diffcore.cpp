// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "fxda/diff/ops.hpp"
#include "testing.hpp"

namespace fxda::diff {
namespace {

using testing::gradient_error;
using testing::random_between;
using testing::random_tensor;

Var constant(Shape s, std::vector<double> v) { return Var(Tensor(std::move(s), std::move(v))); }

TEST(Conv2d, IdentityKernel) {
  Rng rng(1);
  const auto x = random_tensor(rng, {3, 5, 6});
  Tensor k({3, 3, 1, 1});
  for (std::size_t c = 0; c < 3; ++c) k[c * 3 + c] = 1.0;
  const auto y = conv2d(Var(x), Var(k), Var(), 1, Padding::same);
  EXPECT_EQ(y.value(), x);
}

TEST(Conv2d, OnesKernelOnConstantField) {
  const double c = 1.75;
  const auto y = conv2d(Var(Tensor({1, 6, 7}, c)), Var(Tensor({1, 1, 3, 3}, 1.0)), Var(), 1,
                        Padding::same);
  for (std::size_t i = 1; i + 1 < 6; ++i) {
    for (std::size_t j = 1; j + 1 < 7; ++j) EXPECT_DOUBLE_EQ(y.value().at(0, i, j), 9.0 * c);
  }
  EXPECT_DOUBLE_EQ(y.value().at(0, 0, 0), 4.0 * c);
}

TEST(Conv2d, StrideTwoHalves) {
  const auto y = conv2d(Var(Tensor({2, 8, 8}, 1.0)), Var(Tensor({5, 2, 2, 2}, 0.5)), Var(), 2,
                        Padding::valid);
  EXPECT_EQ(y.shape(), (Shape{5, 4, 4}));
  EXPECT_DOUBLE_EQ(y.value().at(4, 3, 3), 4.0);
}

TEST(Conv2d, ShapeMismatchIsDiagnosed) {
  try {
    conv2d(Var(Tensor({2, 8, 8})), Var(Tensor({5, 3, 3, 3})), Var(), 1, Padding::same);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("["), std::string::npos) << e.what();
  }
  EXPECT_THROW(conv2d(Var(Tensor({1, 7, 8})), Var(Tensor({1, 1, 2, 2})), Var(), 2, Padding::valid),
               ShapeError);
}

TEST(LayerNorm, ConstantInputGivesZero) {
  const auto y = layer_norm(Var(Tensor({4, 3, 3}, 2.5)), Var(Tensor({4}, 1.0)), Var(Tensor({4})));
  for (double v : y.value().values()) EXPECT_EQ(v, 0.0);
}

TEST(LayerNorm, TwoValueGroup) {
  const auto y = layer_norm(constant({2, 1, 1}, {2.0, 4.0}), Var(Tensor({2}, 1.0)), Var(Tensor({2})));
  const double expect = 1.0 / std::sqrt(1.0 + 1e-5);
  EXPECT_NEAR(y.value()[0], -expect, 1e-15);
  EXPECT_NEAR(y.value()[1], expect, 1e-15);
}

TEST(LayerNorm, GainAndBiasAreAffine) {
  Rng rng(3);
  const auto x = random_tensor(rng, {3, 4, 2});
  const auto plain = layer_norm(Var(x), Var(Tensor({3}, 1.0)), Var(Tensor({3})));
  const auto g = constant({3}, {2.0, -1.0, 0.5});
  const auto b = constant({3}, {0.1, 0.2, -0.3});
  const auto y = layer_norm(Var(x), g, b);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t q = 0; q < 8; ++q) {
      EXPECT_NEAR(y.value()[c * 8 + q], g.value()[c] * plain.value()[c * 8 + q] + b.value()[c],
                  1e-14);
    }
  }
}

TEST(LayerNorm, GroupMeanVanishes) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t c = random_between(rng, 2, 9), h = random_between(rng, 1, 5);
    const auto x = random_tensor(rng, {c, h, 3}, -10.0, 10.0);
    const auto y = layer_norm(Var(x), Var(Tensor({c}, 1.0)), Var(Tensor({c})));
    for (std::size_t q = 0; q < h * 3; ++q) {
      double mean = 0.0;
      for (std::size_t k = 0; k < c; ++k) mean += y.value()[k * h * 3 + q];
      EXPECT_LT(std::abs(mean / static_cast<double>(c)), 1e-10);
    }
  }
}

TEST(Silu, KnownValues) {
  const auto y = silu(constant({3}, {0.0, 1.0, 50.0}));
  EXPECT_EQ(y.value()[0], 0.0);
  EXPECT_NEAR(y.value()[1], 0.7310585786300049, 1e-15);
  EXPECT_NEAR(y.value()[2], 50.0, 1e-15);
}

TEST(PixelShuffle, Definition) {
  const auto y = pixel_shuffle(constant({4, 1, 1}, {1.0, 2.0, 3.0, 4.0}), 2);
  EXPECT_EQ(y.shape(), (Shape{1, 2, 2}));
  EXPECT_EQ(y.value().storage(), (std::vector<double>{1.0, 2.0, 3.0, 4.0}));
  EXPECT_EQ(pixel_shuffle(Var(Tensor({8, 2, 2})), 2).shape(), (Shape{2, 4, 4}));
  EXPECT_THROW(pixel_shuffle(Var(Tensor({6, 2, 2})), 2), ShapeError);
}

TEST(PixelShuffle, RoundTripAndMultiset) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t c = random_between(rng, 1, 4) * 4;
    const auto x = random_tensor(rng, {c, random_between(rng, 1, 5), random_between(rng, 1, 5)});
    const auto y = pixel_shuffle(Var(x), 2);
    EXPECT_EQ(pixel_unshuffle(y, 2).value(), x);
    auto a = x.storage(), b = y.value().storage();
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    EXPECT_EQ(a, b);
  }
}

TEST(BilinearResize, ConstantPreserved) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const double v = rng.uniform(-5, 5);
    const std::size_t h = random_between(rng, 1, 9), w = random_between(rng, 1, 9);
    const std::size_t h2 = random_between(rng, 1, 9), w2 = random_between(rng, 1, 9);
    const auto y = bilinear_resize(Var(Tensor({2, h, w}, v)), h2, w2);
    for (double x : y.value().values()) EXPECT_DOUBLE_EQ(x, v);
    const auto back = bilinear_resize(y, h, w);
    for (double x : back.value().values()) EXPECT_DOUBLE_EQ(x, v);
  }
}

TEST(BilinearResize, RampStaysLinear) {
  Tensor ramp({1, 6, 3});
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 3; ++j) ramp.at(0, i, j) = 2.0 + 3.0 * static_cast<double>(i);
  }
  const auto y = bilinear_resize(Var(ramp), 5, 3);
  for (std::size_t i = 0; i < 5; ++i) {
    const double expect = 2.0 + 15.0 * static_cast<double>(i) / 4.0;
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(y.value().at(0, i, j), expect, 1e-12);
  }
}

TEST(BilinearResize, StaysWithinRange) {
  Rng rng(7);
  const auto x = random_tensor(rng, {2, 5, 7});
  const auto [lo, hi] = std::minmax_element(x.storage().begin(), x.storage().end());
  const auto y = bilinear_resize(Var(x), 11, 4);
  for (double v : y.value().values()) {
    EXPECT_GE(v, *lo);
    EXPECT_LE(v, *hi);
  }
}

TEST(Backward, SumOfSquares) {
  Parameter p("p", Tensor({2}, std::vector<double>{1.0, 2.0}));
  backward(sum(mul(p.var(), p.var())));
  EXPECT_EQ(p.grad().storage(), (std::vector<double>{2.0, 4.0}));
  backward(sum(mul(p.var(), p.var())));
  EXPECT_EQ(p.grad().storage(), (std::vector<double>{4.0, 8.0}));
  p.zero_grad();
  EXPECT_EQ(p.grad().storage(), (std::vector<double>{0.0, 0.0}));
}

TEST(Backward, UnreachableParameterUntouched) {
  Parameter p("p", Tensor({2}, 1.0));
  Parameter q("q", Tensor({2}, 1.0));
  q.grad()[0] = 3.0;
  backward(sum(p.var()));
  EXPECT_EQ(q.grad().storage(), (std::vector<double>{3.0, 0.0}));
}

TEST(Backward, RejectsNonScalarLoss) {
  Parameter p("p", Tensor({2}, 1.0));
  EXPECT_THROW(backward(scale(p.var(), 2.0)), ShapeError);
}

TEST(Shapes, DownThenUpRestoresExtents) {
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t h = 2 * random_between(rng, 1, 6), w = 2 * random_between(rng, 1, 6);
    const auto x = Var(random_tensor(rng, {3, h, w}));
    const auto d = conv2d(x, Var(random_tensor(rng, {4, 3, 2, 2})), Var(), 2, Padding::valid);
    const auto u = pixel_shuffle(
        conv2d(d, Var(random_tensor(rng, {12, 4, 3, 3})), Var(), 1, Padding::same), 2);
    EXPECT_EQ(u.shape(), (Shape{3, h, w}));
  }
}

TEST(Determinism, RepeatedForwardIsBitIdentical) {
  Rng rng(9);
  const auto x = random_tensor(rng, {3, 6, 6});
  const auto k = random_tensor(rng, {4, 3, 3, 3});
  const auto run = [&] {
    return silu(layer_norm(conv2d(Var(x), Var(k), Var(), 1, Padding::same), Var(Tensor({4}, 1.0)),
                           Var(Tensor({4}))))
        .value();
  };
  EXPECT_EQ(run(), run());
}

// Finite-difference checks on random small shapes for every op.
class GradientCheck : public ::testing::TestWithParam<int> {};

TEST_P(GradientCheck, Conv2dSame) {
  Rng rng(100 + GetParam());
  const std::size_t c = random_between(rng, 1, 3), co = random_between(rng, 1, 3);
  const std::size_t h = random_between(rng, 2, 5), w = random_between(rng, 2, 5);
  const double err = gradient_error(
      [](std::span<const Var> v) { return conv2d(v[0], v[1], v[2], 1, Padding::same); },
      {random_tensor(rng, {c, h, w}), random_tensor(rng, {co, c, 3, 3}), random_tensor(rng, {co})},
      rng);
  EXPECT_LT(err, 1e-4);
}

TEST_P(GradientCheck, Conv2dStride2) {
  Rng rng(200 + GetParam());
  const std::size_t c = random_between(rng, 1, 3), co = random_between(rng, 1, 3);
  const std::size_t h = 2 * random_between(rng, 1, 3), w = 2 * random_between(rng, 1, 3);
  const double err = gradient_error(
      [](std::span<const Var> v) { return conv2d(v[0], v[1], v[2], 2, Padding::valid); },
      {random_tensor(rng, {c, h, w}), random_tensor(rng, {co, c, 2, 2}), random_tensor(rng, {co})},
      rng);
  EXPECT_LT(err, 1e-4);
}

TEST_P(GradientCheck, LayerNorm) {
  Rng rng(300 + GetParam());
  const std::size_t c = random_between(rng, 2, 5);
  const double err = gradient_error(
      [](std::span<const Var> v) { return layer_norm(v[0], v[1], v[2]); },
      {random_tensor(rng, {c, random_between(rng, 1, 4), random_between(rng, 1, 4)}),
       random_tensor(rng, {c}), random_tensor(rng, {c})},
      rng);
  EXPECT_LT(err, 1e-4);
}

TEST_P(GradientCheck, Elementwise) {
  Rng rng(400 + GetParam());
  const Shape s{random_between(rng, 1, 3), random_between(rng, 1, 4), random_between(rng, 1, 4)};
  const Tensor factor = random_tensor(rng, s);
  const std::vector<double> cf{0.5, -2.0, 1.5}, co{0.1, 0.2, 0.3};
  const double err = gradient_error(
      [&](std::span<const Var> v) {
        const auto m = mul(silu(v[0]), v[1]);
        const auto a = add(scale(m, 0.7), sub(mul_const(v[0], factor), v[1]));
        return channel_affine(abs(a), std::span(cf).first(s[0]), std::span(co).first(s[0]));
      },
      {random_tensor(rng, s, -2.0, 2.0), random_tensor(rng, s)}, rng);
  EXPECT_LT(err, 1e-4);
}

TEST_P(GradientCheck, Rearrangements) {
  Rng rng(500 + GetParam());
  const std::size_t h = 2 * random_between(rng, 1, 3), w = 2 * random_between(rng, 1, 3);
  const double err = gradient_error(
      [&](std::span<const Var> v) {
        const auto s = pixel_unshuffle(pixel_shuffle(v[0], 2), 2);
        const Var parts[] = {s, v[1]};
        const auto cat = concat_channels(parts);
        const auto cut = crop(cat, 1, 0, h - 1, w);
        return embed(cut, h + 2, w + 1, 1, 1);
      },
      {random_tensor(rng, {4, h, w}), random_tensor(rng, {2, h, w})}, rng);
  EXPECT_LT(err, 1e-4);
}

TEST_P(GradientCheck, BilinearResize) {
  Rng rng(600 + GetParam());
  const double err = gradient_error(
      [&](std::span<const Var> v) { return bilinear_resize(v[0], 7, 3); },
      {random_tensor(rng, {2, random_between(rng, 2, 6), random_between(rng, 2, 6)})}, rng);
  EXPECT_LT(err, 1e-4);
}

TEST_P(GradientCheck, Reductions) {
  Rng rng(700 + GetParam());
  const Shape s{2, 3, random_between(rng, 1, 4)};
  const Tensor w = random_tensor(rng, s);
  const double err = gradient_error(
      [&](std::span<const Var> v) {
        return add(sum(mul(v[0], v[0])), weighted_sum(v[0], w));
      },
      {random_tensor(rng, s)}, rng);
  EXPECT_LT(err, 1e-4);
}

INSTANTIATE_TEST_SUITE_P(Random, GradientCheck, ::testing::Range(0, 5));

}  // namespace
}  // namespace fxda::diff
