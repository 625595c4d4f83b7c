// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fxda::obs {

/// Synthetic infrared channel with transmittance tau(p) = exp(-(p/p_c)^gamma).
struct ChannelSpec {
  int id = 0;
  double peak_pressure = 500.0;  // hPa
  double gamma = 3.0;
  double gain_t = 1.0;
  double gain_q = 0.4;

  void validate(std::span<const double> levels) const;
  double transmittance(double pressure) const;
};

/// Water-vapour-like channels peaking at 300, 500 and 700 hPa.
std::vector<ChannelSpec> default_channels();

struct WeightingFunction {
  int channel_id = 0;
  std::vector<double> weights;  // one per level, sums to one

  std::size_t peak_level() const;
};

/// Discrete |d tau / d ln p| over layers bounded by the log-pressure
/// midpoints between levels, normalized to unit sum. Levels must be strictly
/// increasing and at least two.
WeightingFunction weighting_function(const ChannelSpec& channel,
                                     std::span<const double> levels);

struct CloudState {
  bool cloudy = false;
  std::size_t top_level = 0;
};

/// 1 - 0.1 (1 - cos theta).
double limb_factor(double zenith_deg);

/// Brightness temperature of one column. Under an opaque cloud every weight
/// at or below the cloud top is moved onto the cloud-top level.
double simulate_bt(std::span<const double> t, std::span<const double> q,
                   const ChannelSpec& channel, const WeightingFunction& wf,
                   double zenith_deg, CloudState cloud = {});
double simulate_bt(std::span<const double> t, std::span<const double> q,
                   const ChannelSpec& channel, std::span<const double> levels,
                   double zenith_deg, CloudState cloud = {});

struct BtJacobian {
  std::vector<double> d_temperature;
  std::vector<double> d_humidity;
};

/// Clear-sky derivatives of simulate_bt with respect to every level.
BtJacobian jacobian_bt(const ChannelSpec& channel, const WeightingFunction& wf,
                       double zenith_deg);

}  // namespace fxda::obs
