// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "fxda/atm/grid.hpp"
#include "fxda/diff/graph.hpp"

namespace fxda::atm {

/// Dynamics constants for one six-hour-analog step.
struct ModelConfig {
  /// Zonal wind per level in cells per step (shared by T and Q).
  std::vector<double> wind{1.5, 1.2, 0.8, 0.5, 0.3};
  double diffusion = 0.05;
  /// Strength of the saturating T-Q exchange.
  double coupling = 0.1;
  /// Newtonian relaxation rate towards the climatology.
  double relaxation = 0.08;
  /// Per-level tendencies added every step; empty means zero.
  std::vector<double> source_t;
  std::vector<double> source_q;
  std::uint64_t seed = 1;
};

/// Steps per simulated day (one step is six hours).
inline constexpr int kStepsPerDay = 4;
inline constexpr double kMinutesPerStep = 360.0;

/// Periodic-in-longitude multi-level model: upwind zonal advection,
/// explicit diffusion with no-flux poles, bounded T-Q coupling, relaxation
/// and optional sources. Q is clipped to [0, 100] after each step.
class Model {
 public:
  /// Rejects configurations outside the stability bounds.
  Model(GridSpec grid, ModelConfig config);

  const GridSpec& grid() const { return grid_; }
  const ModelConfig& config() const { return config_; }
  const diff::Tensor& climatology() const { return climatology_; }

  /// One step. `forcing`, when given, is added before clipping.
  GridState step(const GridState& state,
                 const diff::Tensor* forcing = nullptr) const;
  std::vector<GridState> rollout(const GridState& state, int steps) const;

  /// Differentiable step for training through forecasts.
  diff::Var step(const diff::Var& state) const;

 private:
  void advect(diff::Tensor& x) const;
  void advect_adjoint(diff::Tensor& g) const;
  void diffuse(diff::Tensor& x) const;
  void tendencies(diff::Tensor& x) const;

  GridSpec grid_;
  ModelConfig config_;
  diff::Tensor climatology_;
  std::vector<double> level_t_mean_;
  std::vector<double> level_q_mean_;
};

/// Convenience wrappers.
GridState step(const GridState& state, const ModelConfig& config,
               const GridSpec& grid);
std::vector<GridState> rollout(const GridState& state,
                               const ModelConfig& config, const GridSpec& grid,
                               int steps);

/// Reference profiles used by the climatology.
double reference_temperature(double pressure_hpa);
double reference_humidity(double pressure_hpa);

}  // namespace fxda::atm
