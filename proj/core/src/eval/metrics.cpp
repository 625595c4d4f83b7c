// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#include "fxda/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "fxda/rng.hpp"

namespace fxda::eval {
namespace {

void check_pair(const diff::Tensor& pred, const diff::Tensor& truth, std::size_t channel) {
  if (pred.shape() != truth.shape() || pred.rank() != 3) {
    throw diff::ShapeError("rmse: prediction " + diff::to_string(pred.shape()) + " vs truth " +
                           diff::to_string(truth.shape()));
  }
  if (channel >= pred.extent(0)) {
    throw std::out_of_range("rmse: channel " + std::to_string(channel) + " out of range");
  }
}

}  // namespace

double rmse(const diff::Tensor& pred, const diff::Tensor& truth,
            std::span<const double> lat_weights, std::size_t channel) {
  check_pair(pred, truth, channel);
  const std::size_t h = pred.extent(1), w = pred.extent(2);
  if (lat_weights.size() != h) throw diff::ShapeError("rmse: latitude weights do not match rows");
  double acc = 0.0;
  for (std::size_t i = 0; i < h; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < w; ++j) {
      const double d = pred.at(channel, i, j) - truth.at(channel, i, j);
      row += d * d;
    }
    acc += lat_weights[i] * row;
  }
  return std::sqrt(acc / static_cast<double>(h * w));
}

double regional_rmse(const diff::Tensor& pred, const diff::Tensor& truth, const Box& box,
                     std::span<const double> latitudes_deg, std::size_t channel) {
  check_pair(pred, truth, channel);
  if (box.height == 0 || box.width == 0) throw std::invalid_argument("regional_rmse: empty box");
  if (box.row0 + box.height > pred.extent(1) || box.col0 + box.width > pred.extent(2)) {
    throw std::out_of_range("regional_rmse: box exceeds the grid");
  }
  if (latitudes_deg.size() != pred.extent(1)) {
    throw diff::ShapeError("regional_rmse: latitudes do not match rows");
  }
  std::vector<double> lats(latitudes_deg.begin() + static_cast<std::ptrdiff_t>(box.row0),
                           latitudes_deg.begin() + static_cast<std::ptrdiff_t>(box.row0 + box.height));
  const auto weights = atm::latitude_weights(lats);
  double acc = 0.0;
  for (std::size_t i = 0; i < box.height; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < box.width; ++j) {
      const double d = pred.at(channel, box.row0 + i, box.col0 + j) -
                       truth.at(channel, box.row0 + i, box.col0 + j);
      row += d * d;
    }
    acc += weights[i] * row;
  }
  return std::sqrt(acc / static_cast<double>(box.height * box.width));
}

double normalized_diff(double a, double b) {
  if (b == 0.0) throw std::invalid_argument("normalized_diff: reference RMSE is zero");
  return (a - b) / b;
}

diff::Tensor rmse_map(const diff::Tensor& pred, const diff::Tensor& truth, std::size_t channel,
                      std::size_t block_rows, std::size_t block_cols,
                      std::span<const double> latitudes_deg) {
  check_pair(pred, truth, channel);
  const std::size_t h = pred.extent(1), w = pred.extent(2);
  if (block_rows == 0 || block_cols == 0 || h % block_rows != 0 || w % block_cols != 0) {
    throw std::invalid_argument("rmse_map: block " + std::to_string(block_rows) + "x" +
                                std::to_string(block_cols) + " does not tile " +
                                std::to_string(h) + "x" + std::to_string(w));
  }
  diff::Tensor out(diff::Shape{1, h / block_rows, w / block_cols});
  for (std::size_t bi = 0; bi < h / block_rows; ++bi) {
    for (std::size_t bj = 0; bj < w / block_cols; ++bj) {
      out.at(0, bi, bj) = regional_rmse(
          pred, truth, Box{bi * block_rows, bj * block_cols, block_rows, block_cols},
          latitudes_deg, channel);
    }
  }
  return out;
}

namespace {

std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("spearman: need two equal-length series of length >= 2");
  }
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

Interval bootstrap_mean(std::span<const double> values, std::size_t resamples, double level,
                        std::uint64_t seed) {
  if (values.empty() || resamples == 0 || !(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument("bootstrap: need values, resamples and a level in (0, 1)");
  }
  const double n = static_cast<double>(values.size());
  Interval out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  Rng rng(seed);
  std::vector<double> means(resamples);
  for (auto& m : means) {
    double acc = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) acc += values[rng.below(values.size())];
    m = acc / n;
  }
  std::sort(means.begin(), means.end());
  const double alpha = 0.5 * (1.0 - level);
  const auto pick = [&](double q) {
    const double pos = q * static_cast<double>(resamples - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, resamples - 1);
    return means[lo] + (pos - static_cast<double>(lo)) * (means[hi] - means[lo]);
  };
  out.lo = pick(alpha);
  out.hi = pick(1.0 - alpha);
  return out;
}

std::vector<double> moving_average(std::span<const double> values, std::size_t window) {
  if (window == 0) throw std::invalid_argument("moving_average: window must be >= 1");
  std::vector<double> out(values.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    acc += values[i];
    if (i >= window) acc -= values[i - window];
    out[i] = acc / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

std::string channel_name(const atm::GridSpec& grid, std::size_t channel) {
  const std::size_t l = channel % grid.level_count();
  const char var = channel < grid.level_count() ? 'T' : 'Q';
  return var + std::to_string(static_cast<long>(std::lround(grid.levels[l])));
}

}  // namespace fxda::eval
