// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "fxda/diff/tensor.hpp"

namespace fxda::atm {

/// Regular latitude-longitude grid with a stack of pressure levels.
/// Row 0 is the southernmost latitude; levels run from the top of the
/// atmosphere downwards (increasing pressure).
struct GridSpec {
  std::size_t height = 64;
  std::size_t width = 128;
  std::vector<double> levels{200.0, 300.0, 500.0, 700.0, 850.0};

  /// Throws std::invalid_argument on degenerate extents or unsorted levels.
  void validate() const;

  std::size_t level_count() const { return levels.size(); }
  /// Two variables (T, Q) per level.
  std::size_t channels() const { return 2 * levels.size(); }
  std::size_t t_channel(std::size_t level) const { return level; }
  std::size_t q_channel(std::size_t level) const { return levels.size() + level; }

  double lat_spacing() const { return 180.0 / static_cast<double>(height); }
  double lon_spacing() const { return 360.0 / static_cast<double>(width); }
  double latitude(std::size_t row) const;
  double longitude(std::size_t col) const;
  std::vector<double> latitudes() const;

  /// alpha_i = H cos(phi_i) / sum_j cos(phi_j); averages to one.
  std::vector<double> latitude_weights() const;

  diff::Shape state_shape() const { return {channels(), height, width}; }
};

/// alpha weights for an arbitrary list of latitudes in degrees.
std::vector<double> latitude_weights(const std::vector<double>& latitudes_deg);

/// Multi-level T/Q field: channels ordered (T at each level, Q at each level).
class GridState {
 public:
  GridState() = default;
  explicit GridState(const GridSpec& grid);
  explicit GridState(diff::Tensor fields);

  diff::Tensor& fields() { return fields_; }
  const diff::Tensor& fields() const { return fields_; }

  std::size_t channels() const { return fields_.extent(0); }
  std::size_t height() const { return fields_.extent(1); }
  std::size_t width() const { return fields_.extent(2); }

  double& at(std::size_t c, std::size_t i, std::size_t j) { return fields_.at(c, i, j); }
  double at(std::size_t c, std::size_t i, std::size_t j) const {
    return fields_.at(c, i, j);
  }

  bool all_finite() const { return fields_.all_finite(); }

  friend bool operator==(const GridState&, const GridState&) = default;

 private:
  diff::Tensor fields_;
};

}  // namespace fxda::atm
