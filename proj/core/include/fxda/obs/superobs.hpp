// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "fxda/atm/grid.hpp"
#include "fxda/diff/tensor.hpp"

namespace fxda::obs {

inline constexpr std::size_t kAuxPlanes = 7;
inline constexpr double kWindowMinutes = 60.0;

/// Rectangular window of the model grid, in cell indices.
struct Crop {
  std::size_t row0 = 16;
  std::size_t col0 = 48;
  std::size_t height = 32;
  std::size_t width = 32;

  void validate(const atm::GridSpec& grid) const;
  bool contains(std::size_t row, std::size_t col) const {
    return row >= row0 && row < row0 + height && col >= col0 && col < col0 + width;
  }
  friend bool operator==(const Crop&, const Crop&) = default;
};

/// One raw satellite pixel.
struct ObsFootprint {
  double lat = 0.0;
  double lon = 0.0;
  double time_offset = 0.0;  // minutes within [-60, 60]
  double zenith = 0.0;       // degrees within [0, 70]
  std::vector<double> bt;    // one per channel
  bool cloudy = false;
  std::size_t cloud_top = 0;

  void validate() const;
};

/// Gridded observations for one analysis window. Planes are frame-major:
/// bt plane (f, k) is channel f*K + k; aux plane (f, e) is f*7 + e.
struct SuperObsGrid {
  Crop crop;
  std::size_t frames = 0;
  std::vector<int> channel_ids;
  std::int64_t epoch_minutes = 0;  // analysis time, minutes since 1970-01-01
  diff::Tensor bt;                 // [F*K, h, w]; 0 where masked
  std::vector<std::uint8_t> mask;  // [F, h, w]; 1 = observed
  diff::Tensor aux;                // [F*7, h, w]
  diff::Tensor cloud_fraction;     // [F, h, w]; diagnostic, not a net input

  std::size_t channels() const { return channel_ids.size(); }
  std::size_t mask_index(std::size_t f, std::size_t i, std::size_t j) const {
    return (f * crop.height + i) * crop.width + j;
  }
  bool valid(std::size_t f, std::size_t i, std::size_t j) const {
    return mask[mask_index(f, i, j)] != 0;
  }
  double& value(std::size_t f, std::size_t k, std::size_t i, std::size_t j) {
    return bt.at(f * channels() + k, i, j);
  }
  double value(std::size_t f, std::size_t k, std::size_t i, std::size_t j) const {
    return bt.at(f * channels() + k, i, j);
  }
  /// Fraction of (frame, cell) slots that carry data.
  double coverage() const;

  friend bool operator==(const SuperObsGrid&, const SuperObsGrid&) = default;
};

/// Cell containing a point; boxes are (lo, hi] so shared edges go to the
/// lower index. Longitudes wrap.
std::size_t row_of(double lat, const atm::GridSpec& grid);
std::size_t col_of(double lon, const atm::GridSpec& grid);
/// Frame whose sub-window holds `time_offset`; [lo, hi) with the last frame
/// closed at +60 minutes.
std::size_t frame_of(double time_offset, std::size_t frames);
/// Centre of frame f as a minute offset.
double frame_center(std::size_t frame, std::size_t frames);

/// Satellite zenith angle: 0 at the crop centre growing linearly to 70
/// degrees at the crop corners.
double zenith_at(double lat, double lon, const Crop& crop, const atm::GridSpec& grid);

/// [cos lon, sin lat, cos zenith, cos/sin of day-of-year, cos/sin of
/// minute-of-day].
std::array<double, kAuxPlanes> encode_aux(double lat, double lon, double zenith,
                                          std::int64_t epoch_minutes);

/// Averages footprints per cell and frame, masks empty slots, fills the
/// encoding planes from cell centres and frame centre times.
SuperObsGrid make_superobs(const std::vector<ObsFootprint>& footprints,
                           const atm::GridSpec& grid, const Crop& crop,
                           std::size_t frames, std::vector<int> channel_ids,
                           std::int64_t epoch_minutes);

}  // namespace fxda::obs
