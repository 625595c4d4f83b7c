// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#include "fxda/atm/noise.hpp"

#include <cmath>
#include <stdexcept>

namespace fxda::atm {
namespace {

// 1D Gaussian filter whose self-convolution is exp(-d^2 / (2 L^2)), scaled
// to unit sum of squares.
std::vector<double> filter_taps(double length_scale, int& radius) {
  const double sigma = length_scale / std::sqrt(2.0);
  radius = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  double sq = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    const double v = std::exp(-0.5 * k * k / (sigma * sigma));
    taps[static_cast<std::size_t>(k + radius)] = v;
    sq += v * v;
  }
  for (auto& t : taps) t /= std::sqrt(sq);
  return taps;
}

}  // namespace

diff::Tensor correlated_plane(std::size_t height, std::size_t width,
                              double length_scale, double nugget, Rng& rng) {
  if (!(nugget >= 0.0 && nugget <= 1.0)) {
    throw std::invalid_argument("noise: nugget must lie in [0, 1]");
  }
  diff::Tensor out(diff::Shape{1, height, width});
  if (!(length_scale > 0.0)) {
    for (std::size_t k = 0; k < out.numel(); ++k) out[k] = rng.normal();
    return out;
  }
  int radius = 0;
  const auto taps = filter_taps(length_scale, radius);
  const auto r = static_cast<std::size_t>(radius);
  // White noise on a latitude-padded canvas keeps variance stationary at
  // the poles; columns wrap.
  const std::size_t ph = height + 2 * r;
  std::vector<double> white(ph * width);
  for (auto& v : white) v = rng.normal();
  std::vector<double> rows(ph * width, 0.0);
  std::vector<double> wrapped(width + 2 * r);
  for (std::size_t i = 0; i < ph; ++i) {
    const double* src = white.data() + i * width;
    for (std::size_t j = 0; j < wrapped.size(); ++j) {
      wrapped[j] = src[(j + width * (r / width + 1) - r) % width];
    }
    for (std::size_t j = 0; j < width; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < taps.size(); ++k) acc += taps[k] * wrapped[j + k];
      rows[i * width + j] = acc;
    }
  }
  const double smooth = std::sqrt(1.0 - nugget);
  const double white_amp = std::sqrt(nugget);
  for (std::size_t i = 0; i < height; ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < taps.size(); ++k) {
        acc += taps[k] * rows[(i + k) * width + j];
      }
      out[i * width + j] = smooth * acc;
    }
  }
  if (white_amp > 0.0) {
    for (std::size_t k = 0; k < out.numel(); ++k) out[k] += white_amp * rng.normal();
  }
  return out;
}

diff::Tensor correlated_noise(const GridSpec& grid, const NoiseSpec& spec,
                              Rng& rng) {
  const std::size_t levels = grid.level_count();
  if (spec.channel_std.size() != grid.channels()) {
    throw std::invalid_argument("noise: need one standard deviation per channel");
  }
  if (!(spec.vertical_rho >= 0.0 && spec.vertical_rho < 1.0)) {
    throw std::invalid_argument("noise: vertical correlation must lie in [0, 1)");
  }
  const std::size_t n = grid.height * grid.width;
  diff::Tensor out(grid.state_shape());
  const double innovation = std::sqrt(1.0 - spec.vertical_rho * spec.vertical_rho);
  for (std::size_t var = 0; var < 2; ++var) {
    std::vector<double> prev(n, 0.0);
    for (std::size_t l = 0; l < levels; ++l) {
      const auto plane = correlated_plane(grid.height, grid.width,
                                          spec.length_scale, spec.nugget, rng);
      const std::size_t c = var * levels + l;
      for (std::size_t k = 0; k < n; ++k) {
        prev[k] = l == 0 ? plane[k] : spec.vertical_rho * prev[k] + innovation * plane[k];
        out[c * n + k] = spec.channel_std[c] * prev[k];
      }
    }
  }
  return out;
}

}  // namespace fxda::atm
