// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#include "fxda/obs/superobs.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace fxda::obs {
namespace {

double rad(double deg) { return deg * std::numbers::pi / 180.0; }

}  // namespace

void Crop::validate(const atm::GridSpec& grid) const {
  if (height == 0 || width == 0 || row0 + height > grid.height ||
      col0 + width > grid.width) {
    throw std::invalid_argument(
        "crop: window " + std::to_string(height) + "x" + std::to_string(width) +
        " at (" + std::to_string(row0) + "," + std::to_string(col0) +
        ") does not fit the " + std::to_string(grid.height) + "x" +
        std::to_string(grid.width) + " grid");
  }
}

void ObsFootprint::validate() const {
  if (!(lat >= -90.0 && lat <= 90.0) || !std::isfinite(lon) ||
      !(time_offset >= -kWindowMinutes && time_offset <= kWindowMinutes) ||
      !(zenith >= 0.0 && zenith <= 70.0)) {
    throw std::invalid_argument("footprint: angle or time out of range");
  }
  for (double v : bt) {
    if (!std::isfinite(v)) throw std::invalid_argument("footprint: non-finite BT");
  }
}

double SuperObsGrid::coverage() const {
  if (mask.empty()) return 0.0;
  const auto on = std::count(mask.begin(), mask.end(), std::uint8_t{1});
  return static_cast<double>(on) / static_cast<double>(mask.size());
}

std::size_t row_of(double lat, const atm::GridSpec& grid) {
  const double x = (lat + 90.0) / grid.lat_spacing();
  const double idx = std::ceil(x) - 1.0;
  return static_cast<std::size_t>(
      std::clamp(idx, 0.0, static_cast<double>(grid.height - 1)));
}

std::size_t col_of(double lon, const atm::GridSpec& grid) {
  double wrapped = std::fmod(lon, 360.0);
  if (wrapped < 0.0) wrapped += 360.0;
  const double dl = grid.lon_spacing();
  const double idx = std::ceil((wrapped + 0.5 * dl) / dl) - 1.0;
  const auto w = static_cast<long>(grid.width);
  return static_cast<std::size_t>(((static_cast<long>(idx) % w) + w) % w);
}

std::size_t frame_of(double time_offset, std::size_t frames) {
  const double width = 2.0 * kWindowMinutes / static_cast<double>(frames);
  const double f = std::floor((time_offset + kWindowMinutes) / width);
  return static_cast<std::size_t>(std::clamp(f, 0.0, static_cast<double>(frames - 1)));
}

double frame_center(std::size_t frame, std::size_t frames) {
  const double width = 2.0 * kWindowMinutes / static_cast<double>(frames);
  return -kWindowMinutes + (static_cast<double>(frame) + 0.5) * width;
}

double zenith_at(double lat, double lon, const Crop& crop, const atm::GridSpec& grid) {
  const double lat_c = grid.latitude(crop.row0) +
                       0.5 * static_cast<double>(crop.height - 1) * grid.lat_spacing();
  const double lon_c = grid.longitude(crop.col0) +
                       0.5 * static_cast<double>(crop.width - 1) * grid.lon_spacing();
  const double half_h = 0.5 * static_cast<double>(crop.height) * grid.lat_spacing();
  const double half_w = 0.5 * static_cast<double>(crop.width) * grid.lon_spacing();
  double dlon = std::fmod(lon - lon_c + 540.0, 360.0) - 180.0;
  const double d = std::hypot(lat - lat_c, dlon);
  const double dmax = std::hypot(half_h, half_w);
  return 70.0 * std::min(1.0, d / dmax);
}

std::array<double, kAuxPlanes> encode_aux(double lat, double lon, double zenith,
                                          std::int64_t epoch_minutes) {
  using namespace std::chrono;
  const sys_time<minutes> t{minutes{epoch_minutes}};
  const auto day = floor<days>(t);
  const year_month_day ymd{day};
  const auto doy = (day - sys_days{ymd.year() / January / 1}).count() + 1;
  const auto mod = (t - day).count();
  const double a_doy = 2.0 * std::numbers::pi * static_cast<double>(doy) / 365.25;
  const double a_mod = 2.0 * std::numbers::pi * static_cast<double>(mod) / 1440.0;
  return {std::cos(rad(lon)),   std::sin(rad(lat)),   std::cos(rad(zenith)),
          std::cos(a_doy),      std::sin(a_doy),      std::cos(a_mod),
          std::sin(a_mod)};
}

SuperObsGrid make_superobs(const std::vector<ObsFootprint>& footprints,
                           const atm::GridSpec& grid, const Crop& crop,
                           std::size_t frames, std::vector<int> channel_ids,
                           std::int64_t epoch_minutes) {
  crop.validate(grid);
  if (frames == 0) throw std::invalid_argument("superobs: frames must be >= 1");
  const std::size_t k = channel_ids.size();
  const std::size_t h = crop.height, w = crop.width;

  SuperObsGrid out;
  out.crop = crop;
  out.frames = frames;
  out.channel_ids = std::move(channel_ids);
  out.epoch_minutes = epoch_minutes;
  out.bt = diff::Tensor(diff::Shape{frames * k, h, w});
  out.mask.assign(frames * h * w, 0);
  out.aux = diff::Tensor(diff::Shape{frames * kAuxPlanes, h, w});
  out.cloud_fraction = diff::Tensor(diff::Shape{frames, h, w});

  std::vector<std::size_t> count(frames * h * w, 0);
  for (const auto& fp : footprints) {
    if (fp.bt.size() != k) {
      throw std::invalid_argument("superobs: footprint carries " +
                                  std::to_string(fp.bt.size()) + " channels, expected " +
                                  std::to_string(k));
    }
    const std::size_t row = row_of(fp.lat, grid);
    const std::size_t col = col_of(fp.lon, grid);
    if (!crop.contains(row, col)) continue;
    const std::size_t f = frame_of(fp.time_offset, frames);
    const std::size_t i = row - crop.row0, j = col - crop.col0;
    const std::size_t m = out.mask_index(f, i, j);
    ++count[m];
    for (std::size_t c = 0; c < k; ++c) out.value(f, c, i, j) += fp.bt[c];
    if (fp.cloudy) out.cloud_fraction.at(f, i, j) += 1.0;
  }
  for (std::size_t f = 0; f < frames; ++f) {
    const auto frame_epoch =
        epoch_minutes + static_cast<std::int64_t>(std::lround(frame_center(f, frames)));
    for (std::size_t i = 0; i < h; ++i) {
      const double lat = grid.latitude(crop.row0 + i);
      for (std::size_t j = 0; j < w; ++j) {
        const double lon = grid.longitude(crop.col0 + j);
        const std::size_t m = out.mask_index(f, i, j);
        if (count[m] > 0) {
          out.mask[m] = 1;
          const double n = static_cast<double>(count[m]);
          for (std::size_t c = 0; c < k; ++c) out.value(f, c, i, j) /= n;
          out.cloud_fraction.at(f, i, j) /= n;
        }
        const auto enc = encode_aux(lat, lon, zenith_at(lat, lon, crop, grid), frame_epoch);
        for (std::size_t e = 0; e < kAuxPlanes; ++e) {
          out.aux.at(f * kAuxPlanes + e, i, j) = enc[e];
        }
      }
    }
  }
  return out;
}

}  // namespace fxda::obs
