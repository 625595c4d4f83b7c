// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "fxda/atm/grid.hpp"
#include "fxda/rng.hpp"

namespace fxda::atm {

/// Separable correlated Gaussian field: horizontal Gaussian correlation
/// exp(-d^2 / (2 L^2)) in cell units plus a white nugget, AR(1) correlation
/// between adjacent levels of the same variable, no T-Q cross correlation.
struct NoiseSpec {
  double length_scale = 4.0;
  /// Correlation between adjacent levels.
  double vertical_rho = 0.36787944117144233;  // exp(-1)
  /// Fraction of variance that is spatially white.
  double nugget = 0.01;
  /// Standard deviation per channel (T levels then Q levels).
  std::vector<double> channel_std;
};

/// Unit-variance horizontally correlated plane of size height x width;
/// periodic in the column direction.
diff::Tensor correlated_plane(std::size_t height, std::size_t width,
                              double length_scale, double nugget, Rng& rng);

/// Full [C,H,W] noise field following `spec`.
diff::Tensor correlated_noise(const GridSpec& grid, const NoiseSpec& spec,
                              Rng& rng);

}  // namespace fxda::atm
