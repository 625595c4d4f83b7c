// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "fxda/diff/graph.hpp"

namespace fxda::diff {

enum class Padding { same, valid };

/// 2D convolution over a [C,H,W] input with a [Co,C,k,k] kernel and an
/// optional [Co] bias (pass an undefined Var for none). `same` padding
/// zero-fills and needs an odd kernel; `valid` requires the extents to tile
/// exactly under the stride.
Var conv2d(const Var& input, const Var& kernel, const Var& bias, int stride,
           Padding padding);

/// Normalizes across the channel axis at every spatial position, then
/// applies per-channel gain and bias.
Var layer_norm(const Var& input, const Var& gain, const Var& bias,
               double epsilon = 1e-5);

Var silu(const Var& input);

/// [C*r*r,H,W] -> [C,r*H,r*W]; out[c, h*r+i, w*r+j] = in[c*r*r + i*r + j, h, w].
Var pixel_shuffle(const Var& input, int factor);
Var pixel_unshuffle(const Var& input, int factor);

/// Bilinear resampling with corner-aligned sample positions.
Var bilinear_resize(const Var& input, std::size_t height, std::size_t width);

Var concat_channels(std::span<const Var> inputs);
Var crop(const Var& input, std::size_t top, std::size_t left,
         std::size_t height, std::size_t width);
/// Places `input` into a zero [C,height,width] canvas at (top, left).
Var embed(const Var& input, std::size_t height, std::size_t width,
          std::size_t top, std::size_t left);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
/// Elementwise product with a constant tensor of the same shape.
Var mul_const(const Var& a, const Tensor& factor);
Var scale(const Var& a, double factor);
/// y[c,...] = x[c,...] * factor[c] + offset[c] for rank-3 input.
Var channel_affine(const Var& input, std::span<const double> factor,
                   std::span<const double> offset);
Var abs(const Var& input);
Var sum(const Var& input);
/// Scalar sum of weights * input.
Var weighted_sum(const Var& input, const Tensor& weights);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }

}  // namespace fxda::diff
