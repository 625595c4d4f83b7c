// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#include "fxda/var/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace fxda::var {
namespace {

constexpr double kMinRcond = 1e-15;

Eigen::LLT<MatrixXd> factorize(const MatrixXd& s, double* rcond_out) {
  Eigen::LLT<MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) {
    throw SingularError("innovation covariance is not positive definite", 0.0);
  }
  const double rc = llt.rcond();
  if (!(rc > kMinRcond)) {
    throw SingularError("innovation covariance is singular (rcond " + std::to_string(rc) + ")",
                        rc);
  }
  if (rcond_out) *rcond_out = rc;
  return llt;
}

void check_r(const VectorXd& r_diag, Eigen::Index m) {
  if (r_diag.size() != m) {
    throw std::invalid_argument("R has " + std::to_string(r_diag.size()) +
                                " variances for " + std::to_string(m) + " observations");
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!(r_diag[i] >= 0.0) || !std::isfinite(r_diag[i])) {
      throw std::invalid_argument("R variances must be finite and non-negative");
    }
  }
}

// Columns of B H^T for the separable covariance.
MatrixXd bht(const LinearObsOperator& h, const CovarianceB& b) {
  const StateWindow& win = h.window;
  const MatrixXd block = b.channel_block();
  const auto n = static_cast<Eigen::Index>(win.size());
  const auto m = static_cast<Eigen::Index>(h.size());
  MatrixXd out(n, m);
  for (Eigen::Index o = 0; o < m; ++o) {
    const auto& row = h.rows[static_cast<std::size_t>(o)];
    const VectorXd g = block * Eigen::Map<const VectorXd>(row.weights.data(),
                                                          static_cast<Eigen::Index>(row.weights.size()));
    const double oi = static_cast<double>(row.cell / win.width);
    const double oj = static_cast<double>(row.cell % win.width);
    for (std::size_t i = 0; i < win.height; ++i) {
      for (std::size_t j = 0; j < win.width; ++j) {
        const double corr = b.horizontal(static_cast<double>(i) - oi, static_cast<double>(j) - oj);
        for (std::size_t c = 0; c < win.channels; ++c) {
          out(static_cast<Eigen::Index>(win.index(c, i, j)), o) = corr * g[static_cast<Eigen::Index>(c)];
        }
      }
    }
  }
  return out;
}

MatrixXd innovation_cov(const LinearObsOperator& h, const MatrixXd& bh, const VectorXd& r_diag) {
  const auto m = static_cast<Eigen::Index>(h.size());
  MatrixXd s(m, m);
  for (Eigen::Index o = 0; o < m; ++o) {
    const auto& row = h.rows[static_cast<std::size_t>(o)];
    for (Eigen::Index p = 0; p < m; ++p) {
      double acc = 0.0;
      for (std::size_t c = 0; c < row.weights.size(); ++c) {
        if (row.weights[c] == 0.0) continue;
        acc += row.weights[c] *
               bh(static_cast<Eigen::Index>(h.window.index(c, 0, 0) + row.cell), p);
      }
      s(o, p) = acc;
    }
  }
  s = 0.5 * (s + s.transpose()).eval();
  s.diagonal() += r_diag;
  return s;
}

}  // namespace

VectorXd StateWindow::extract(const atm::GridState& state) const {
  VectorXd v(static_cast<Eigen::Index>(size()));
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < height; ++i) {
      for (std::size_t j = 0; j < width; ++j) {
        v[static_cast<Eigen::Index>(index(c, i, j))] = state.at(c, row0 + i, col0 + j);
      }
    }
  }
  return v;
}

void StateWindow::scatter_add(const VectorXd& v, atm::GridState& state) const {
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < height; ++i) {
      for (std::size_t j = 0; j < width; ++j) {
        state.at(c, row0 + i, col0 + j) += v[static_cast<Eigen::Index>(index(c, i, j))];
      }
    }
  }
}

void CovarianceB::validate() const {
  if (levels == 0 || variance.size() != 2 * levels) {
    throw std::invalid_argument("B needs one variance per channel (2 x levels)");
  }
  for (double v : variance) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("B variances must be > 0");
  }
  if (!(length_scale > 0.0)) throw std::invalid_argument("B length scale must be > 0");
  if (!(vertical_rho >= 0.0 && vertical_rho < 1.0)) {
    throw std::invalid_argument("B vertical correlation must lie in [0, 1)");
  }
  if (!(nugget >= 0.0 && nugget < 1.0)) throw std::invalid_argument("B nugget must lie in [0, 1)");
}

double CovarianceB::horizontal(double di, double dj) const {
  const double d2 = di * di + dj * dj;
  const double smooth = (1.0 - nugget) * std::exp(-d2 / (2.0 * length_scale * length_scale));
  return d2 == 0.0 ? smooth + nugget : smooth;
}

double CovarianceB::vertical(std::size_t c1, std::size_t c2) const {
  if ((c1 < levels) != (c2 < levels)) return 0.0;
  const auto l1 = static_cast<long>(c1 % levels), l2 = static_cast<long>(c2 % levels);
  return std::pow(vertical_rho, static_cast<double>(std::labs(l1 - l2)));
}

MatrixXd CovarianceB::channel_block() const {
  validate();
  const auto c = static_cast<Eigen::Index>(variance.size());
  MatrixXd out(c, c);
  for (Eigen::Index a = 0; a < c; ++a) {
    for (Eigen::Index b = 0; b < c; ++b) {
      out(a, b) = std::sqrt(variance[static_cast<std::size_t>(a)] *
                            variance[static_cast<std::size_t>(b)]) *
                  vertical(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
    }
  }
  return out;
}

MatrixXd CovarianceB::materialize(const StateWindow& win) const {
  const MatrixXd block = channel_block();
  if (static_cast<std::size_t>(block.rows()) != win.channels) {
    throw std::invalid_argument("B channel count does not match the window");
  }
  const auto n = static_cast<Eigen::Index>(win.size());
  MatrixXd out(n, n);
  for (std::size_t c1 = 0; c1 < win.channels; ++c1) {
    for (std::size_t p1 = 0; p1 < win.cells(); ++p1) {
      for (std::size_t c2 = 0; c2 < win.channels; ++c2) {
        for (std::size_t p2 = 0; p2 < win.cells(); ++p2) {
          const double di = static_cast<double>(p1 / win.width) - static_cast<double>(p2 / win.width);
          const double dj = static_cast<double>(p1 % win.width) - static_cast<double>(p2 % win.width);
          out(static_cast<Eigen::Index>(c1 * win.cells() + p1),
              static_cast<Eigen::Index>(c2 * win.cells() + p2)) =
              block(static_cast<Eigen::Index>(c1), static_cast<Eigen::Index>(c2)) *
              horizontal(di, dj);
        }
      }
    }
  }
  return out;
}

void CovarianceR::validate() const {
  if (variance.empty()) throw std::invalid_argument("R has no channels");
  for (double v : variance) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("R variances must be > 0");
  }
}

MatrixXd LinearObsOperator::dense() const {
  MatrixXd out = MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()),
                                static_cast<Eigen::Index>(window.size()));
  for (std::size_t o = 0; o < rows.size(); ++o) {
    for (std::size_t c = 0; c < rows[o].weights.size(); ++c) {
      out(static_cast<Eigen::Index>(o),
          static_cast<Eigen::Index>(c * window.cells() + rows[o].cell)) = rows[o].weights[c];
    }
  }
  return out;
}

VectorXd LinearObsOperator::apply(const VectorXd& x) const {
  VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t o = 0; o < rows.size(); ++o) {
    double acc = 0.0;
    for (std::size_t c = 0; c < rows[o].weights.size(); ++c) {
      acc += rows[o].weights[c] * x[static_cast<Eigen::Index>(c * window.cells() + rows[o].cell)];
    }
    y[static_cast<Eigen::Index>(o)] = acc;
  }
  return y;
}

ObsSelection select_observations(const obs::SuperObsGrid& so, const atm::GridSpec& grid,
                                 const std::vector<obs::ChannelSpec>& channels,
                                 const StateWindow& window, const CovarianceR& r,
                                 bool skip_cloudy) {
  r.validate();
  if (channels.size() != so.channels() || r.variance.size() != so.channels()) {
    throw std::invalid_argument("oracle: channel list does not match the observations");
  }
  if (window.channels != grid.channels()) {
    throw std::invalid_argument("oracle: window must carry every state channel");
  }
  const std::size_t levels = grid.level_count();
  std::vector<obs::WeightingFunction> wfs;
  for (const auto& c : channels) wfs.push_back(obs::weighting_function(c, grid.levels));

  ObsSelection sel;
  sel.h.window = window;
  std::vector<double> values;
  const obs::Crop& crop = so.crop;
  for (std::size_t i = 0; i < window.height; ++i) {
    for (std::size_t j = 0; j < window.width; ++j) {
      const std::size_t row = window.row0 + i, col = window.col0 + j;
      if (!crop.contains(row, col)) continue;
      const std::size_t ci = row - crop.row0, cj = col - crop.col0;
      std::size_t valid = 0;
      bool cloud = false;
      for (std::size_t f = 0; f < so.frames; ++f) {
        if (!so.valid(f, ci, cj)) continue;
        ++valid;
        cloud = cloud || so.cloud_fraction.at(f, ci, cj) > 0.0;
      }
      if (valid == 0 || (skip_cloudy && cloud)) continue;
      const double lat = grid.latitude(row), lon = grid.longitude(col);
      const double zenith = obs::zenith_at(lat, lon, crop, grid);
      for (std::size_t k = 0; k < channels.size(); ++k) {
        double mean = 0.0;
        for (std::size_t f = 0; f < so.frames; ++f) {
          if (so.valid(f, ci, cj)) mean += so.value(f, k, ci, cj);
        }
        mean /= static_cast<double>(valid);
        const auto jac = obs::jacobian_bt(channels[k], wfs[k], zenith);
        LinearObsOperator::Row r_row;
        r_row.cell = i * window.width + j;
        r_row.obs_channel = k;
        r_row.weights.assign(window.channels, 0.0);
        for (std::size_t l = 0; l < levels; ++l) {
          r_row.weights[grid.t_channel(l)] = jac.d_temperature[l];
          r_row.weights[grid.q_channel(l)] = jac.d_humidity[l];
        }
        sel.h.rows.push_back(std::move(r_row));
        values.push_back(mean);
        sel.error_variance.push_back(r.variance[k] / static_cast<double>(valid));
      }
    }
  }
  sel.values = Eigen::Map<const VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  return sel;
}

AnalysisResult analysis_3dvar(const VectorXd& xb, const VectorXd& yo, const MatrixXd& h,
                              const MatrixXd& b, const VectorXd& r_diag) {
  if (b.rows() != xb.size() || b.cols() != xb.size() || h.cols() != xb.size() ||
      h.rows() != yo.size()) {
    throw std::invalid_argument("3D-Var: inconsistent dimensions (xb " +
                                std::to_string(xb.size()) + ", yo " + std::to_string(yo.size()) +
                                ", H " + std::to_string(h.rows()) + "x" +
                                std::to_string(h.cols()) + ")");
  }
  check_r(r_diag, yo.size());
  const MatrixXd bh = b * h.transpose();
  MatrixXd s = h * bh;
  s = 0.5 * (s + s.transpose()).eval();
  s.diagonal() += r_diag;
  AnalysisResult out;
  const auto llt = factorize(s, &out.rcond);
  out.increment = bh * llt.solve(yo - h * xb);
  out.analysis = xb + out.increment;
  return out;
}

AnalysisResult analysis_3dvar(const VectorXd& xb, const VectorXd& yo,
                              const LinearObsOperator& h, const CovarianceB& b,
                              const VectorXd& r_diag) {
  if (static_cast<std::size_t>(xb.size()) != h.window.size() ||
      static_cast<std::size_t>(yo.size()) != h.size()) {
    throw std::invalid_argument("3D-Var: inconsistent dimensions");
  }
  check_r(r_diag, yo.size());
  AnalysisResult out;
  if (h.size() == 0) {
    out.analysis = xb;
    out.increment = VectorXd::Zero(xb.size());
    out.rcond = 1.0;
    return out;
  }
  const MatrixXd bh = bht(h, b);
  const auto llt = factorize(innovation_cov(h, bh, r_diag), &out.rcond);
  out.increment = bh * llt.solve(yo - h.apply(xb));
  out.analysis = xb + out.increment;
  return out;
}

MatrixXd kalman_gain(const MatrixXd& h, const MatrixXd& b, const VectorXd& r_diag) {
  if (b.rows() != b.cols() || h.cols() != b.rows()) {
    throw std::invalid_argument("Kalman gain: inconsistent dimensions");
  }
  check_r(r_diag, h.rows());
  const MatrixXd bh = b * h.transpose();
  MatrixXd s = h * bh;
  s = 0.5 * (s + s.transpose()).eval();
  s.diagonal() += r_diag;
  const auto llt = factorize(s, nullptr);
  // K = B H^T S^-1 = (S^-1 H B)^T
  return llt.solve(bh.transpose()).transpose();
}

MatrixXd kalman_gain(const LinearObsOperator& h, const CovarianceB& b, const VectorXd& r_diag) {
  check_r(r_diag, static_cast<Eigen::Index>(h.size()));
  const MatrixXd bh = bht(h, b);
  const auto llt = factorize(innovation_cov(h, bh, r_diag), nullptr);
  return llt.solve(bh.transpose()).transpose();
}

VectorXd single_obs_increment(const MatrixXd& gain, const VectorXd& dy) {
  if (gain.cols() != dy.size()) {
    throw std::invalid_argument("increment: gain has " + std::to_string(gain.cols()) +
                                " columns, perturbation " + std::to_string(dy.size()));
  }
  return gain * dy;
}

double cost_function(const VectorXd& x, const VectorXd& xb, const VectorXd& yo,
                     const MatrixXd& h, const MatrixXd& b, const VectorXd& r_diag) {
  check_r(r_diag, yo.size());
  Eigen::LLT<MatrixXd> llt(b);
  if (llt.info() != Eigen::Success) throw SingularError("B is not positive definite", 0.0);
  const VectorXd dx = x - xb;
  const VectorXd dy = yo - h * x;
  return 0.5 * dx.dot(llt.solve(dx)) + 0.5 * dy.dot(dy.cwiseQuotient(r_diag));
}

VectorXd cost_gradient(const VectorXd& x, const VectorXd& xb, const VectorXd& yo,
                       const MatrixXd& h, const MatrixXd& b, const VectorXd& r_diag) {
  check_r(r_diag, yo.size());
  Eigen::LLT<MatrixXd> llt(b);
  if (llt.info() != Eigen::Success) throw SingularError("B is not positive definite", 0.0);
  const VectorXd dy = yo - h * x;
  return llt.solve(VectorXd(x - xb)) - h.transpose() * dy.cwiseQuotient(r_diag);
}

atm::GridState local_analysis(const atm::GridState& background, const obs::SuperObsGrid& so,
                              const atm::GridSpec& grid,
                              const std::vector<obs::ChannelSpec>& channels,
                              const CovarianceB& b, const CovarianceR& r,
                              const LocalAnalysisOptions& options) {
  if (options.tile == 0) throw std::invalid_argument("local analysis: tile must be >= 1");
  const obs::Crop& crop = so.crop;
  crop.validate(grid);
  atm::GridState out = background;
  for (std::size_t ti = 0; ti < crop.height; ti += options.tile) {
    for (std::size_t tj = 0; tj < crop.width; tj += options.tile) {
      const std::size_t r0 = ti >= options.halo ? ti - options.halo : 0;
      const std::size_t c0 = tj >= options.halo ? tj - options.halo : 0;
      const std::size_t r1 = std::min(crop.height, ti + options.tile + options.halo);
      const std::size_t c1 = std::min(crop.width, tj + options.tile + options.halo);
      StateWindow win{crop.row0 + r0, crop.col0 + c0, r1 - r0, c1 - c0, grid.channels()};
      const ObsSelection sel = select_observations(so, grid, channels, win, r, options.skip_cloudy);
      const VectorXd rd = Eigen::Map<const VectorXd>(
          sel.error_variance.data(), static_cast<Eigen::Index>(sel.error_variance.size()));
      const auto res = analysis_3dvar(win.extract(background), sel.values, sel.h, b, rd);
      const std::size_t tile_h = std::min(options.tile, crop.height - ti);
      const std::size_t tile_w = std::min(options.tile, crop.width - tj);
      for (std::size_t c = 0; c < win.channels; ++c) {
        for (std::size_t i = 0; i < tile_h; ++i) {
          for (std::size_t j = 0; j < tile_w; ++j) {
            const std::size_t wi = ti + i - r0, wj = tj + j - c0;
            out.at(c, crop.row0 + ti + i, crop.col0 + tj + j) +=
                res.increment[static_cast<Eigen::Index>(win.index(c, wi, wj))];
          }
        }
      }
    }
  }
  return out;
}

}  // namespace fxda::var
