// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "fxda/diff/graph.hpp"

namespace fxda::train {

struct ScheduleConfig {
  std::size_t warmup_steps = 500;
  double start_lrate = 1e-8;
  double stop_lrate = 2e-3;
  double eta_min = 0.0;
  std::size_t total_iterations = 2000;

  void validate() const;
};

/// Linear warmup through step warmup_steps + 1, where the rate reaches
/// stop_lrate, then cosine annealing to eta_min at total_iterations.
double lr_at_step(std::size_t step, const ScheduleConfig& config);

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-5;
};

/// Adam with decoupled weight decay over the trainable parameters.
class AdamW {
 public:
  AdamW(std::vector<diff::Parameter*> params, AdamWConfig config);

  /// p <- p (1 - lr wd) - lr m_hat / (sqrt(v_hat) + eps).
  void step(double lr);
  std::uint64_t steps_taken() const { return t_; }

  std::vector<diff::Tensor>& first_moments() { return m_; }
  std::vector<diff::Tensor>& second_moments() { return v_; }
  void set_steps_taken(std::uint64_t t) { t_ = t; }

 private:
  std::vector<diff::Parameter*> params_;
  AdamWConfig config_;
  std::vector<diff::Tensor> m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace fxda::train
