// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#include "fxda/atm/grid.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace fxda::atm {

void GridSpec::validate() const {
  if (height < 1) throw std::invalid_argument("grid: height must be >= 1");
  if (width < 2) throw std::invalid_argument("grid: width must be >= 2");
  if (levels.empty()) throw std::invalid_argument("grid: no pressure levels");
  for (std::size_t l = 0; l < levels.size(); ++l) {
    if (!(levels[l] > 0.0)) {
      throw std::invalid_argument("grid: non-positive pressure level");
    }
    if (l > 0 && !(levels[l] > levels[l - 1])) {
      throw std::invalid_argument(
          "grid: levels must be strictly increasing in pressure");
    }
  }
}

double GridSpec::latitude(std::size_t row) const {
  return -90.0 + (static_cast<double>(row) + 0.5) * lat_spacing();
}

double GridSpec::longitude(std::size_t col) const {
  return static_cast<double>(col) * lon_spacing();
}

std::vector<double> GridSpec::latitudes() const {
  std::vector<double> out(height);
  for (std::size_t i = 0; i < height; ++i) out[i] = latitude(i);
  return out;
}

std::vector<double> GridSpec::latitude_weights() const {
  return atm::latitude_weights(latitudes());
}

std::vector<double> latitude_weights(const std::vector<double>& latitudes_deg) {
  std::vector<double> w(latitudes_deg.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::cos(latitudes_deg[i] * std::numbers::pi / 180.0);
    total += w[i];
  }
  if (!(total > 0.0)) throw std::invalid_argument("latitude weights: zero sum");
  const double n = static_cast<double>(w.size());
  for (auto& v : w) v = n * v / total;
  return w;
}

GridState::GridState(const GridSpec& grid) : fields_(grid.state_shape()) {}

GridState::GridState(diff::Tensor fields) : fields_(std::move(fields)) {
  diff::require_rank3(fields_, "grid state");
}

}  // namespace fxda::atm
