// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#include "fxda/atm/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace fxda::atm {
namespace {

constexpr double kSaturationScale = 15.0;  // Q units
constexpr double kHumidityPerKelvin = 3.0;
constexpr double kLatentFactor = 0.1;

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

}  // namespace

double reference_temperature(double p) { return 288.0 * std::pow(p / 1000.0, 0.19); }

double reference_humidity(double p) { return 20.0 + 50.0 * p / 1000.0; }

Model::Model(GridSpec grid, ModelConfig config)
    : grid_(std::move(grid)), config_(std::move(config)) {
  grid_.validate();
  const std::size_t levels = grid_.level_count();
  if (config_.wind.size() != levels) {
    throw std::invalid_argument("model: expected " + std::to_string(levels) +
                                " wind values, got " +
                                std::to_string(config_.wind.size()));
  }
  const double max_wind = static_cast<double>(grid_.width) / 4.0;
  for (double u : config_.wind) {
    if (!std::isfinite(u) || std::abs(u) > max_wind) {
      throw std::invalid_argument("model: wind " + std::to_string(u) +
                                  " exceeds W/4 = " + std::to_string(max_wind));
    }
  }
  if (!(config_.diffusion >= 0.0 && config_.diffusion <= 0.25)) {
    throw std::invalid_argument("model: diffusion must lie in [0, 0.25]");
  }
  if (!(config_.relaxation >= 0.0 && config_.relaxation < 1.0)) {
    throw std::invalid_argument("model: relaxation must lie in [0, 1)");
  }
  if (!(config_.coupling >= 0.0 && config_.coupling <= 0.5)) {
    throw std::invalid_argument("model: coupling must lie in [0, 0.5]");
  }
  for (auto* src : {&config_.source_t, &config_.source_q}) {
    if (src->empty()) src->assign(levels, 0.0);
    if (src->size() != levels) {
      throw std::invalid_argument("model: source needs one value per level");
    }
  }

  level_t_mean_.resize(levels);
  level_q_mean_.resize(levels);
  climatology_ = diff::Tensor(grid_.state_shape());
  for (std::size_t l = 0; l < levels; ++l) {
    level_t_mean_[l] = reference_temperature(grid_.levels[l]);
    level_q_mean_[l] = reference_humidity(grid_.levels[l]);
    for (std::size_t i = 0; i < grid_.height; ++i) {
      const double phi = deg2rad(grid_.latitude(i));
      const double c = std::cos(phi);
      for (std::size_t j = 0; j < grid_.width; ++j) {
        const double lam = deg2rad(grid_.longitude(j));
        climatology_.at(grid_.t_channel(l), i, j) =
            level_t_mean_[l] + 15.0 * (c * c - 0.5) + 3.0 * std::cos(2.0 * lam) * c;
        climatology_.at(grid_.q_channel(l), i, j) =
            level_q_mean_[l] + 25.0 * (c * c - 0.5) +
            8.0 * std::sin(3.0 * lam + 0.5 * static_cast<double>(l)) * c;
      }
    }
  }
}

namespace {

void advect_fields(const GridSpec& grid, const ModelConfig& config,
                   diff::Tensor& x) {
  const std::size_t levels = grid.level_count();
  const std::size_t h = grid.height, w = grid.width;
  const auto wi = static_cast<std::ptrdiff_t>(w);
  std::vector<double> row(w);
  for (std::size_t c = 0; c < 2 * levels; ++c) {
    const double u = config.wind[c % levels];
    const double whole = std::floor(u);
    const double frac = u - whole;
    const auto shift = static_cast<std::ptrdiff_t>(whole);
    for (std::size_t i = 0; i < h; ++i) {
      double* r = x.data() + (c * h + i) * w;
      for (std::ptrdiff_t j = 0; j < wi; ++j) {
        row[static_cast<std::size_t>(j)] = r[((j - shift) % wi + wi) % wi];
      }
      if (frac == 0.0) {
        std::copy(row.begin(), row.end(), r);
        continue;
      }
      for (std::ptrdiff_t j = 0; j < wi; ++j) {
        const double west = row[static_cast<std::size_t>((j - 1 + wi) % wi)];
        const double here = row[static_cast<std::size_t>(j)];
        r[j] = here - frac * (here - west);
      }
    }
  }
}

void advect_fields_adjoint(const GridSpec& grid, const ModelConfig& config,
                           diff::Tensor& g) {
  const std::size_t levels = grid.level_count();
  const std::size_t h = grid.height, w = grid.width;
  const auto wi = static_cast<std::ptrdiff_t>(w);
  std::vector<double> row(w);
  for (std::size_t c = 0; c < 2 * levels; ++c) {
    const double u = config.wind[c % levels];
    const double whole = std::floor(u);
    const double frac = u - whole;
    const auto shift = static_cast<std::ptrdiff_t>(whole);
    for (std::size_t i = 0; i < h; ++i) {
      double* r = g.data() + (c * h + i) * w;
      for (std::ptrdiff_t j = 0; j < wi; ++j) {
        const double east = r[(j + 1) % wi];
        row[static_cast<std::size_t>(j)] = (1.0 - frac) * r[j] + frac * east;
      }
      for (std::ptrdiff_t j = 0; j < wi; ++j) {
        r[j] = row[static_cast<std::size_t>(((j + shift) % wi + wi) % wi)];
      }
    }
  }
}

void diffuse_fields(const GridSpec& grid, const ModelConfig& config,
                    diff::Tensor& x) {
  const double k = config.diffusion;
  if (k == 0.0) return;
  const std::size_t h = grid.height, w = grid.width;
  const std::size_t channels = grid.channels();
  std::vector<double> plane(h * w);
  for (std::size_t c = 0; c < channels; ++c) {
    double* p = x.data() + c * h * w;
    std::copy(p, p + h * w, plane.begin());
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        const double here = plane[i * w + j];
        double lap = plane[i * w + (j + 1) % w] + plane[i * w + (j + w - 1) % w] -
                     2.0 * here;
        if (i > 0) lap += plane[(i - 1) * w + j] - here;
        if (i + 1 < h) lap += plane[(i + 1) * w + j] - here;
        p[i * w + j] = here + k * lap;
      }
    }
  }
}

}  // namespace

void Model::advect(diff::Tensor& x) const { advect_fields(grid_, config_, x); }

void Model::advect_adjoint(diff::Tensor& g) const {
  advect_fields_adjoint(grid_, config_, g);
}

void Model::diffuse(diff::Tensor& x) const { diffuse_fields(grid_, config_, x); }

void Model::tendencies(diff::Tensor& x) const {
  const std::size_t levels = grid_.level_count();
  const std::size_t n = grid_.height * grid_.width;
  const double c = config_.coupling, r = config_.relaxation;
  const double* clim = climatology_.data();
  for (std::size_t l = 0; l < levels; ++l) {
    double* t = x.data() + grid_.t_channel(l) * n;
    double* q = x.data() + grid_.q_channel(l) * n;
    const double* tc = clim + grid_.t_channel(l) * n;
    const double* qc = clim + grid_.q_channel(l) * n;
    const double st = config_.source_t[l], sq = config_.source_q[l];
    for (std::size_t k = 0; k < n; ++k) {
      const double excess =
          q[k] - level_q_mean_[l] - kHumidityPerKelvin * (t[k] - level_t_mean_[l]);
      const double rate = c * kSaturationScale * std::tanh(excess / kSaturationScale);
      const double t_new = t[k] + kLatentFactor * rate - r * (t[k] - tc[k]) + st;
      const double q_new = q[k] - rate - r * (q[k] - qc[k]) + sq;
      t[k] = t_new;
      q[k] = q_new;
    }
  }
}

GridState Model::step(const GridState& state, const diff::Tensor* forcing) const {
  if (state.fields().shape() != grid_.state_shape()) {
    throw diff::ShapeError("model step: state " +
                           diff::to_string(state.fields().shape()) +
                           " does not match grid " +
                           diff::to_string(grid_.state_shape()));
  }
  diff::Tensor x = state.fields();
  advect(x);
  diffuse(x);
  tendencies(x);
  if (forcing) {
    if (forcing->shape() != x.shape()) {
      throw diff::ShapeError("model step: forcing shape mismatch");
    }
    for (std::size_t i = 0; i < x.numel(); ++i) x[i] += (*forcing)[i];
  }
  const std::size_t n = grid_.height * grid_.width;
  double* q = x.data() + grid_.q_channel(0) * n;
  for (std::size_t k = 0; k < grid_.level_count() * n; ++k) {
    q[k] = std::clamp(q[k], 0.0, 100.0);
  }
  return GridState(std::move(x));
}

std::vector<GridState> Model::rollout(const GridState& state, int steps) const {
  if (steps < 0) throw std::invalid_argument("rollout: negative step count");
  std::vector<GridState> out;
  out.reserve(static_cast<std::size_t>(steps));
  const GridState* current = &state;
  for (int s = 0; s < steps; ++s) {
    out.push_back(step(*current));
    current = &out.back();
  }
  return out;
}

diff::Var Model::step(const diff::Var& state) const {
  if (state.shape() != grid_.state_shape()) {
    throw diff::ShapeError("model step: state " + diff::to_string(state.shape()) +
                           " does not match grid");
  }
  diff::Tensor x = state.value();
  advect(x);
  diffuse(x);
  diff::Tensor pre_tendency = x;
  tendencies(x);
  const std::size_t n = grid_.height * grid_.width;
  const std::size_t q0 = grid_.q_channel(0) * n;
  std::vector<bool> clipped(grid_.level_count() * n);
  for (std::size_t k = 0; k < clipped.size(); ++k) {
    double& v = x[q0 + k];
    clipped[k] = v < 0.0 || v > 100.0;
    v = std::clamp(v, 0.0, 100.0);
  }
  return diff::make_op(
      std::move(x), {state},
      [grid = grid_, config = config_, t_mean = level_t_mean_, q_mean = level_q_mean_,
       pre = std::move(pre_tendency), clipped = std::move(clipped), n,
       q0](diff::Node& self) {
        if (!self.parents[0]->requires_grad) return;
        diff::Tensor g = self.grad;
        for (std::size_t k = 0; k < clipped.size(); ++k) {
          if (clipped[k]) g[q0 + k] = 0.0;
        }
        const double c = config.coupling, r = config.relaxation;
        for (std::size_t l = 0; l < grid.level_count(); ++l) {
          const std::size_t tc = grid.t_channel(l) * n, qc = grid.q_channel(l) * n;
          for (std::size_t k = 0; k < n; ++k) {
            const double excess = pre[qc + k] - q_mean[l] -
                                  kHumidityPerKelvin * (pre[tc + k] - t_mean[l]);
            const double th = std::tanh(excess / kSaturationScale);
            const double dr = c * (1.0 - th * th);  // d rate / d excess
            const double gt = g[tc + k], gq = g[qc + k];
            // rate depends on excess = Q - m_q - kappa (T - m_t)
            const double d_rate = kLatentFactor * gt - gq;
            g[tc + k] = (1.0 - r) * gt + d_rate * dr * (-kHumidityPerKelvin);
            g[qc + k] = (1.0 - r) * gq + d_rate * dr;
          }
        }
        diffuse_fields(grid, config, g);
        advect_fields_adjoint(grid, config, g);
        diff::Tensor& dx = self.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < dx.numel(); ++i) dx[i] += g[i];
      });
}

GridState step(const GridState& state, const ModelConfig& config,
               const GridSpec& grid) {
  return Model(grid, config).step(state);
}

std::vector<GridState> rollout(const GridState& state, const ModelConfig& config,
                               const GridSpec& grid, int steps) {
  return Model(grid, config).rollout(state, steps);
}

}  // namespace fxda::atm
