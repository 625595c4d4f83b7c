// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#include "fxda/train/optim.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace fxda::train {

void ScheduleConfig::validate() const {
  if (warmup_steps >= total_iterations) {
    throw std::invalid_argument("schedule: warmup_steps must be below total_iterations");
  }
  if (!(start_lrate > 0.0) || !(stop_lrate > 0.0) || !(eta_min >= 0.0)) {
    throw std::invalid_argument("schedule: rates must be positive");
  }
}

double lr_at_step(std::size_t step, const ScheduleConfig& c) {
  if (step < 1 || step > c.total_iterations) {
    throw std::out_of_range("lr_at_step: step " + std::to_string(step) + " outside [1, " +
                            std::to_string(c.total_iterations) + "]");
  }
  if (step <= c.warmup_steps + 1) {
    if (c.warmup_steps == 0) return c.stop_lrate;
    return static_cast<double>(step - 1) / static_cast<double>(c.warmup_steps) *
               (c.stop_lrate - c.start_lrate) +
           c.start_lrate;
  }
  const std::size_t first = c.warmup_steps + 1;
  const double progress =
      static_cast<double>(step - first) / static_cast<double>(c.total_iterations - first);
  return c.eta_min +
         0.5 * (c.stop_lrate - c.eta_min) * (1.0 + std::cos(std::numbers::pi * progress));
}

AdamW::AdamW(std::vector<diff::Parameter*> params, AdamWConfig config)
    : params_(std::move(params)), config_(config) {
  for (auto* p : params_) {
    m_.emplace_back(p->value().shape());
    v_.emplace_back(p->value().shape());
  }
}

void AdamW::step(double lr) {
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double decay = 1.0 - lr * config_.weight_decay;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& value = params_[k]->value();
    const auto& grad = params_[k]->grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < value.numel(); ++i) {
      const double g = grad[i];
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      const double update = (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.epsilon);
      value[i] = value[i] * decay - lr * update;
    }
  }
}

}  // namespace fxda::train
