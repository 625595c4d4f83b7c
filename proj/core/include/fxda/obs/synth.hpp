// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "fxda/atm/grid.hpp"
#include "fxda/obs/channel.hpp"
#include "fxda/obs/superobs.hpp"

namespace fxda::obs {

struct SynthConfig {
  Crop crop;
  std::size_t frames = 3;
  /// Expected footprints per crop cell and frame.
  double density = 3.0;
  double cloud_fraction = 0.3;
  double cloud_length = 3.0;  // cells
  double noise_std = 1.0;     // BT units
  std::vector<ChannelSpec> channels = default_channels();

  void validate(const atm::GridSpec& grid) const;
  std::vector<int> channel_ids() const;
};

struct SynthResult {
  std::vector<ObsFootprint> footprints;
  SuperObsGrid grid;
};

/// Scatters footprints uniformly over the crop and the +-60 minute window,
/// flags clouds from a thresholded correlated field (one per frame) and
/// evaluates the channels on the truth column of each footprint's cell.
SynthResult synthesize_observations(const atm::GridState& truth,
                                    const atm::GridSpec& grid,
                                    const SynthConfig& config,
                                    std::int64_t epoch_minutes, std::uint64_t seed);

/// Minutes since 1970-01-01 at midnight UTC on the given date.
std::int64_t epoch_minutes_of(int year, unsigned month, unsigned day);

}  // namespace fxda::obs
