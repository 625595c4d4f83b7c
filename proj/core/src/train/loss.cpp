// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#include "fxda/train/loss.hpp"

#include <cmath>

#include "fxda/diff/ops.hpp"

namespace fxda::train {
namespace {

diff::Tensor loss_weights(const diff::Shape& shape, std::span<const double> lat_weights,
                          std::span<const double> channel_scale) {
  if (shape.size() != 3) {
    throw diff::ShapeError("weighted_l1: expected [C,H,W], got " + diff::to_string(shape));
  }
  const std::size_t c = shape[0], h = shape[1], w = shape[2];
  if (lat_weights.size() != h) {
    throw diff::ShapeError("weighted_l1: " + std::to_string(lat_weights.size()) +
                           " latitude weights for " + std::to_string(h) + " rows");
  }
  if (!channel_scale.empty() && channel_scale.size() != c) {
    throw diff::ShapeError("weighted_l1: channel scale needs " + std::to_string(c) + " values");
  }
  diff::Tensor weights(shape);
  const double norm = 1.0 / static_cast<double>(c * h * w);
  for (std::size_t k = 0; k < c; ++k) {
    const double s = channel_scale.empty() ? 1.0 : 1.0 / channel_scale[k];
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) weights.at(k, i, j) = norm * lat_weights[i] * s;
    }
  }
  return weights;
}

}  // namespace

diff::Var weighted_l1(const diff::Var& pred, const diff::Tensor& truth,
                      std::span<const double> lat_weights,
                      std::span<const double> channel_scale) {
  if (pred.shape() != truth.shape()) {
    throw diff::ShapeError("weighted_l1: prediction " + diff::to_string(pred.shape()) +
                           " vs truth " + diff::to_string(truth.shape()));
  }
  const auto weights = loss_weights(truth.shape(), lat_weights, channel_scale);
  return diff::weighted_sum(diff::abs(pred - diff::Var(truth)), weights);
}

double weighted_l1(const diff::Tensor& pred, const diff::Tensor& truth,
                   std::span<const double> lat_weights, std::span<const double> channel_scale) {
  if (pred.shape() != truth.shape()) {
    throw diff::ShapeError("weighted_l1: prediction " + diff::to_string(pred.shape()) +
                           " vs truth " + diff::to_string(truth.shape()));
  }
  const auto weights = loss_weights(truth.shape(), lat_weights, channel_scale);
  double acc = 0.0;
  for (std::size_t k = 0; k < pred.numel(); ++k) acc += weights[k] * std::abs(pred[k] - truth[k]);
  return acc;
}

diff::Var total_loss(const diff::Var& analysis_loss, std::span<const diff::Var> rollout) {
  if (rollout.empty()) return analysis_loss;
  diff::Var acc = rollout[0];
  for (std::size_t t = 1; t < rollout.size(); ++t) acc = acc + rollout[t];
  return analysis_loss + diff::scale(acc, 1.0 / static_cast<double>(rollout.size()));
}

double total_loss(double analysis_loss, std::span<const double> rollout) {
  if (rollout.empty()) return analysis_loss;
  double acc = 0.0;
  for (double l : rollout) acc += l;
  return analysis_loss + acc / static_cast<double>(rollout.size());
}

}  // namespace fxda::train
