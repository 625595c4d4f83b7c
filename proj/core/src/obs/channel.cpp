// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#include "fxda/obs/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace fxda::obs {

void ChannelSpec::validate(std::span<const double> levels) const {
  if (levels.empty()) throw std::invalid_argument("channel: no levels");
  if (!(gamma > 0.0)) {
    throw std::invalid_argument("channel " + std::to_string(id) + ": gamma must be > 0");
  }
  if (!(gain_q > 0.0)) {
    throw std::invalid_argument("channel " + std::to_string(id) +
                                ": humidity gain must be > 0");
  }
  if (peak_pressure < levels.front() || peak_pressure > levels.back()) {
    throw std::invalid_argument("channel " + std::to_string(id) +
                                ": peak pressure outside the level range");
  }
}

double ChannelSpec::transmittance(double pressure) const {
  return std::exp(-std::pow(pressure / peak_pressure, gamma));
}

std::vector<ChannelSpec> default_channels() {
  return {
      {9, 300.0, 3.0, 1.0, 0.5},
      {10, 500.0, 3.0, 1.0, 0.4},
      {11, 700.0, 3.0, 1.0, 0.3},
  };
}

std::size_t WeightingFunction::peak_level() const {
  return static_cast<std::size_t>(
      std::distance(weights.begin(), std::max_element(weights.begin(), weights.end())));
}

WeightingFunction weighting_function(const ChannelSpec& channel,
                                     std::span<const double> levels) {
  if (levels.size() < 2) {
    throw std::invalid_argument("weighting function: need at least two levels");
  }
  for (std::size_t l = 1; l < levels.size(); ++l) {
    if (!(levels[l] > levels[l - 1]) || !(levels[l - 1] > 0.0)) {
      throw std::invalid_argument(
          "weighting function: levels must be positive and strictly increasing");
    }
  }
  const std::size_t n = levels.size();
  // Layer edges: geometric midpoints, extrapolated half a spacing at the ends.
  std::vector<double> edges(n + 1);
  for (std::size_t l = 1; l < n; ++l) edges[l] = std::sqrt(levels[l - 1] * levels[l]);
  edges[0] = levels[0] * std::sqrt(levels[0] / levels[1]);
  edges[n] = levels[n - 1] * std::sqrt(levels[n - 1] / levels[n - 2]);

  WeightingFunction wf;
  wf.channel_id = channel.id;
  wf.weights.resize(n);
  double total = 0.0;
  for (std::size_t l = 0; l < n; ++l) {
    const double dtau = channel.transmittance(edges[l]) - channel.transmittance(edges[l + 1]);
    const double dlnp = std::log(edges[l + 1] / edges[l]);
    wf.weights[l] = std::abs(dtau / dlnp);
    total += wf.weights[l];
  }
  if (!(total > 0.0)) {
    throw std::invalid_argument("weighting function: channel " +
                                std::to_string(channel.id) +
                                " has no sensitivity on these levels");
  }
  for (auto& w : wf.weights) w /= total;
  return wf;
}

double limb_factor(double zenith_deg) {
  return 1.0 - 0.1 * (1.0 - std::cos(zenith_deg * std::numbers::pi / 180.0));
}

double simulate_bt(std::span<const double> t, std::span<const double> q,
                   const ChannelSpec& channel, const WeightingFunction& wf,
                   double zenith_deg, CloudState cloud) {
  const std::size_t n = wf.weights.size();
  if (t.size() != n || q.size() != n) {
    throw std::invalid_argument("simulate_bt: column has " + std::to_string(t.size()) +
                                " levels, weighting function " + std::to_string(n));
  }
  double bt = 0.0;
  if (!cloud.cloudy) {
    for (std::size_t l = 0; l < n; ++l) {
      bt += wf.weights[l] * (channel.gain_t * t[l] - channel.gain_q * q[l]);
    }
  } else {
    const std::size_t top = std::min(cloud.top_level, n - 1);
    double hidden = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
      if (l < top) {
        bt += wf.weights[l] * (channel.gain_t * t[l] - channel.gain_q * q[l]);
      } else {
        hidden += wf.weights[l];
      }
    }
    bt += hidden * (channel.gain_t * t[top] - channel.gain_q * q[top]);
  }
  return bt * limb_factor(zenith_deg);
}

double simulate_bt(std::span<const double> t, std::span<const double> q,
                   const ChannelSpec& channel, std::span<const double> levels,
                   double zenith_deg, CloudState cloud) {
  return simulate_bt(t, q, channel, weighting_function(channel, levels), zenith_deg,
                     cloud);
}

BtJacobian jacobian_bt(const ChannelSpec& channel, const WeightingFunction& wf,
                       double zenith_deg) {
  const double limb = limb_factor(zenith_deg);
  BtJacobian j;
  j.d_temperature.resize(wf.weights.size());
  j.d_humidity.resize(wf.weights.size());
  for (std::size_t l = 0; l < wf.weights.size(); ++l) {
    j.d_temperature[l] = channel.gain_t * wf.weights[l] * limb;
    j.d_humidity[l] = -channel.gain_q * wf.weights[l] * limb;
  }
  return j;
}

}  // namespace fxda::obs
