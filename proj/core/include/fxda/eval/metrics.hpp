// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "fxda/atm/grid.hpp"
#include "fxda/diff/tensor.hpp"

namespace fxda::eval {

/// Rows [row0, row0 + height) by columns [col0, col0 + width).
struct Box {
  std::size_t row0 = 0;
  std::size_t col0 = 0;
  std::size_t height = 0;
  std::size_t width = 0;
};

/// sqrt((1 / (H W)) sum alpha_i (pred - truth)^2) over one channel.
double rmse(const diff::Tensor& pred, const diff::Tensor& truth,
            std::span<const double> lat_weights, std::size_t channel);

/// Same with weights renormalized over the rows of `box`.
double regional_rmse(const diff::Tensor& pred, const diff::Tensor& truth, const Box& box,
                     std::span<const double> latitudes_deg, std::size_t channel);

/// (a - b) / b.
double normalized_diff(double rmse_a, double rmse_b);

/// Regional RMSE over non-overlapping blocks; result is [1, H/rows, W/cols].
diff::Tensor rmse_map(const diff::Tensor& pred, const diff::Tensor& truth, std::size_t channel,
                      std::size_t block_rows, std::size_t block_cols,
                      std::span<const double> latitudes_deg);

/// Rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

struct Interval {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  bool excludes_zero() const { return lo > 0.0 || hi < 0.0; }
};

/// Percentile bootstrap of the mean.
Interval bootstrap_mean(std::span<const double> values, std::size_t resamples, double level,
                        std::uint64_t seed);

/// Trailing moving average with the given window (shorter at the start).
std::vector<double> moving_average(std::span<const double> values, std::size_t window);

std::string channel_name(const atm::GridSpec& grid, std::size_t channel);

}  // namespace fxda::eval
