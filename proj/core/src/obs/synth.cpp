// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#include "fxda/obs/synth.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "fxda/atm/noise.hpp"
#include "fxda/rng.hpp"

namespace fxda::obs {

void SynthConfig::validate(const atm::GridSpec& grid) const {
  crop.validate(grid);
  if (frames == 0) throw std::invalid_argument("synth: frames must be >= 1");
  if (!(density > 0.0)) throw std::invalid_argument("synth: density must be > 0");
  if (!(cloud_fraction >= 0.0 && cloud_fraction <= 1.0)) {
    throw std::invalid_argument("synth: cloud fraction must lie in [0, 1]");
  }
  if (!(cloud_length > 0.0) || !(noise_std >= 0.0)) {
    throw std::invalid_argument("synth: cloud length must be > 0, noise >= 0");
  }
  if (channels.empty()) throw std::invalid_argument("synth: no channels");
  for (const auto& c : channels) c.validate(grid.levels);
}

std::vector<int> SynthConfig::channel_ids() const {
  std::vector<int> ids;
  for (const auto& c : channels) ids.push_back(c.id);
  return ids;
}

std::int64_t epoch_minutes_of(int year, unsigned month, unsigned day) {
  using namespace std::chrono;
  const sys_days d{std::chrono::year{year} / std::chrono::month{month} /
                   std::chrono::day{day}};
  return duration_cast<minutes>(d.time_since_epoch()).count();
}

SynthResult synthesize_observations(const atm::GridState& truth,
                                    const atm::GridSpec& grid,
                                    const SynthConfig& config,
                                    std::int64_t epoch_minutes, std::uint64_t seed) {
  config.validate(grid);
  if (truth.fields().shape() != grid.state_shape()) {
    throw diff::ShapeError("synth: truth " + diff::to_string(truth.fields().shape()) +
                           " does not match grid " + diff::to_string(grid.state_shape()));
  }
  const Crop& crop = config.crop;
  const std::size_t h = crop.height, w = crop.width, frames = config.frames;
  const std::size_t levels = grid.level_count();
  Rng rng(seed);

  // Cloud flags and tops per frame and cell.
  std::vector<std::uint8_t> cloudy(frames * h * w, 0);
  std::vector<std::size_t> top(frames * h * w, 0);
  for (std::size_t f = 0; f < frames; ++f) {
    const auto field = atm::correlated_plane(h, w, config.cloud_length, 0.0, rng);
    std::vector<double> sorted(field.values().begin(), field.values().end());
    std::sort(sorted.begin(), sorted.end());
    const auto n_cloudy = static_cast<std::size_t>(
        std::llround(config.cloud_fraction * static_cast<double>(h * w)));
    const double threshold = n_cloudy == 0 ? HUGE_VAL : sorted[h * w - n_cloudy];
    for (std::size_t k = 0; k < h * w; ++k) {
      const std::size_t m = f * h * w + k;
      cloudy[m] = field[k] >= threshold ? 1 : 0;
      top[m] = levels > 1 ? rng.below(levels - 1) : 0;
    }
  }

  std::vector<WeightingFunction> wfs;
  for (const auto& c : config.channels) wfs.push_back(weighting_function(c, grid.levels));

  const double lat_lo = grid.latitude(crop.row0) - 0.5 * grid.lat_spacing();
  const double lon_lo = grid.longitude(crop.col0) - 0.5 * grid.lon_spacing();
  const double lat_span = static_cast<double>(h) * grid.lat_spacing();
  const double lon_span = static_cast<double>(w) * grid.lon_spacing();
  const auto total = static_cast<std::size_t>(
      std::llround(config.density * static_cast<double>(h * w * frames)));

  SynthResult out;
  out.footprints.reserve(total);
  std::vector<double> t(levels), q(levels);
  for (std::size_t n = 0; n < total; ++n) {
    ObsFootprint fp;
    // Draws in (lo, hi] so the point lands in a crop cell under (lo, hi] boxes.
    fp.lat = std::min(lat_lo + lat_span * (1.0 - rng.uniform()), 90.0);
    fp.lon = lon_lo + lon_span * (1.0 - rng.uniform());
    if (fp.lon < 0.0) fp.lon += 360.0;
    fp.time_offset = rng.uniform(-kWindowMinutes, kWindowMinutes);
    fp.zenith = zenith_at(fp.lat, fp.lon, crop, grid);
    const std::size_t row = std::clamp(row_of(fp.lat, grid), crop.row0, crop.row0 + h - 1);
    std::size_t col = col_of(fp.lon, grid);
    if (!crop.contains(crop.row0, col)) col = col < crop.col0 ? crop.col0 : crop.col0 + w - 1;
    const std::size_t f = frame_of(fp.time_offset, frames);
    const std::size_t m = (f * h + (row - crop.row0)) * w + (col - crop.col0);
    fp.cloudy = cloudy[m] != 0;
    fp.cloud_top = top[m];
    for (std::size_t l = 0; l < levels; ++l) {
      t[l] = truth.at(grid.t_channel(l), row, col);
      q[l] = truth.at(grid.q_channel(l), row, col);
    }
    for (std::size_t k = 0; k < config.channels.size(); ++k) {
      const double clean = simulate_bt(t, q, config.channels[k], wfs[k], fp.zenith,
                                       CloudState{fp.cloudy, fp.cloud_top});
      fp.bt.push_back(clean + config.noise_std * rng.normal());
    }
    out.footprints.push_back(std::move(fp));
  }
  out.grid = make_superobs(out.footprints, grid, crop, frames, config.channel_ids(),
                           epoch_minutes);
  return out;
}

}  // namespace fxda::obs
