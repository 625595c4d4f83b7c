// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "fxda/atm/grid.hpp"
#include "fxda/obs/channel.hpp"
#include "fxda/obs/superobs.hpp"

namespace fxda::var {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Raised when the innovation covariance cannot be factorized.
class SingularError : public std::runtime_error {
 public:
  SingularError(const std::string& what, double condition)
      : std::runtime_error(what), condition_(condition) {}
  /// Reciprocal condition estimate at the point of failure.
  double condition() const { return condition_; }

 private:
  double condition_;
};

/// Rectangle of grid columns carrying every channel. Vector layout is
/// channel-major: index = (c * height + i) * width + j.
struct StateWindow {
  std::size_t row0 = 0;
  std::size_t col0 = 0;
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t channels = 1;

  std::size_t cells() const { return height * width; }
  std::size_t size() const { return channels * cells(); }
  std::size_t index(std::size_t c, std::size_t i, std::size_t j) const {
    return (c * height + i) * width + j;
  }
  VectorXd extract(const atm::GridState& state) const;
  void scatter_add(const VectorXd& v, atm::GridState& state) const;
};

/// Separable background covariance: per-channel variance, Gaussian
/// horizontal correlation with a white nugget and AR(1) vertical
/// correlation inside each variable.
struct CovarianceB {
  std::vector<double> variance;  // one per channel (T levels, then Q levels)
  double length_scale = 4.0;     // cells
  double vertical_rho = 0.36787944117144233;
  double nugget = 0.01;
  std::size_t levels = 0;  // channels = 2 * levels

  void validate() const;
  double horizontal(double di, double dj) const;
  double vertical(std::size_t c1, std::size_t c2) const;
  /// Channel-by-channel block: sigma_a sigma_b V(a, b).
  MatrixXd channel_block() const;
  MatrixXd materialize(const StateWindow& window) const;
};

struct CovarianceR {
  std::vector<double> variance;  // one per obs channel

  void validate() const;
};

/// Observation operator with one row per observed value. Each row touches
/// the channels of a single grid column.
struct LinearObsOperator {
  struct Row {
    std::size_t cell = 0;          // i * width + j inside the window
    std::size_t obs_channel = 0;   // index into R
    std::vector<double> weights;   // one per state channel
  };
  StateWindow window;
  std::vector<Row> rows;

  std::size_t size() const { return rows.size(); }
  MatrixXd dense() const;
  VectorXd apply(const VectorXd& x) const;
};

/// Superobs selected by the oracle, averaged over frames.
struct ObsSelection {
  LinearObsOperator h;
  VectorXd values;
  std::vector<double> error_variance;  // per row
};

/// Linearizes the channels at cell-centre zenith angles. Frames are merged
/// by averaging valid values; cloud-affected cells are dropped when
/// `skip_cloudy` is set.
ObsSelection select_observations(const obs::SuperObsGrid& obs, const atm::GridSpec& grid,
                                 const std::vector<obs::ChannelSpec>& channels,
                                 const StateWindow& window, const CovarianceR& r,
                                 bool skip_cloudy = true);

struct AnalysisResult {
  VectorXd analysis;
  VectorXd increment;
  double rcond = 0.0;  // reciprocal condition of H B H^T + R
};

AnalysisResult analysis_3dvar(const VectorXd& xb, const VectorXd& yo, const MatrixXd& h,
                              const MatrixXd& b, const VectorXd& r_diag);
AnalysisResult analysis_3dvar(const VectorXd& xb, const VectorXd& yo,
                              const LinearObsOperator& h, const CovarianceB& b,
                              const VectorXd& r_diag);

MatrixXd kalman_gain(const MatrixXd& h, const MatrixXd& b, const VectorXd& r_diag);
MatrixXd kalman_gain(const LinearObsOperator& h, const CovarianceB& b, const VectorXd& r_diag);

VectorXd single_obs_increment(const MatrixXd& gain, const VectorXd& dy);

double cost_function(const VectorXd& x, const VectorXd& xb, const VectorXd& yo,
                     const MatrixXd& h, const MatrixXd& b, const VectorXd& r_diag);
VectorXd cost_gradient(const VectorXd& x, const VectorXd& xb, const VectorXd& yo,
                       const MatrixXd& h, const MatrixXd& b, const VectorXd& r_diag);

struct LocalAnalysisOptions {
  std::size_t tile = 8;
  std::size_t halo = 4;
  bool skip_cloudy = true;
};

/// Tiles the observed crop, solves each tile with the observations of its
/// haloed window and keeps the increment on the tile interior.
atm::GridState local_analysis(const atm::GridState& background, const obs::SuperObsGrid& obs,
                              const atm::GridSpec& grid,
                              const std::vector<obs::ChannelSpec>& channels,
                              const CovarianceB& b, const CovarianceR& r,
                              const LocalAnalysisOptions& options = {});

}  // namespace fxda::var
