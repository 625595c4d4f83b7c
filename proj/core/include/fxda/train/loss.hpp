// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "fxda/diff/graph.hpp"

namespace fxda::train {

/// (1 / (C H W)) * sum alpha_i |pred - truth|, optionally dividing each
/// channel by `channel_scale`.
diff::Var weighted_l1(const diff::Var& pred, const diff::Tensor& truth,
                      std::span<const double> lat_weights,
                      std::span<const double> channel_scale = {});
double weighted_l1(const diff::Tensor& pred, const diff::Tensor& truth,
                   std::span<const double> lat_weights,
                   std::span<const double> channel_scale = {});

/// L0 + (1/T) sum_t L^t; T = rollout.size().
diff::Var total_loss(const diff::Var& analysis_loss, std::span<const diff::Var> rollout);
double total_loss(double analysis_loss, std::span<const double> rollout);

}  // namespace fxda::train
