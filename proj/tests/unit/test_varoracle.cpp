// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "fxda/var/oracle.hpp"
#include "testing.hpp"

namespace fxda::var {
namespace {

using testing::random_between;
using testing::random_matrix;
using testing::random_spd;
using testing::random_vector;

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) out[k++] = x;
  return out;
}

TEST(Analysis3dVar, ScalarEqualWeights) {
  const auto res = analysis_3dvar(vec({0.0}), vec({2.0}), MatrixXd::Ones(1, 1),
                                  MatrixXd::Ones(1, 1), vec({1.0}));
  EXPECT_NEAR(res.analysis[0], 1.0, 1e-15);
  EXPECT_NEAR(res.increment[0], 1.0, 1e-15);
}

TEST(Analysis3dVar, TwoStateSpreading) {
  MatrixXd b(2, 2);
  b << 1.0, 0.5, 0.5, 1.0;
  MatrixXd h(1, 2);
  h << 1.0, 0.0;
  const auto res = analysis_3dvar(vec({0.0, 0.0}), vec({2.0}), h, b, vec({1.0}));
  EXPECT_NEAR(res.increment[0], 1.0, 1e-15);
  EXPECT_NEAR(res.increment[1], 0.5, 1e-15);
  const MatrixXd k = kalman_gain(h, b, vec({1.0}));
  EXPECT_NEAR(k(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(k(1, 0), 0.25, 1e-15);
}

TEST(KalmanGain, ScalarAndPerfectObservations) {
  EXPECT_NEAR(kalman_gain(MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1), vec({1.0}))(0, 0), 0.5,
              1e-15);
  Rng rng(1);
  const MatrixXd b = random_spd(rng, 4);
  const MatrixXd k = kalman_gain(MatrixXd::Identity(4, 4), b, VectorXd::Constant(4, 1e-12));
  EXPECT_LT((k - MatrixXd::Identity(4, 4)).norm(), 1e-9);
}

TEST(Analysis3dVar, MatchesBruteForceNormalEquations) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = static_cast<Eigen::Index>(random_between(rng, 1, 8));
    const auto m = static_cast<Eigen::Index>(random_between(rng, 1, 6));
    const MatrixXd b = random_spd(rng, n);
    const MatrixXd h = random_matrix(rng, m, n);
    const VectorXd r = random_vector(rng, m, 0.1, 2.0);
    const VectorXd xb = random_vector(rng, n), yo = random_vector(rng, m);
    const auto res = analysis_3dvar(xb, yo, h, b, r);
    // Information form: (B^-1 + H^T R^-1 H) xa = B^-1 xb + H^T R^-1 yo.
    const MatrixXd binv = b.inverse();
    const MatrixXd rinv = r.cwiseInverse().asDiagonal();
    const MatrixXd lhs = binv + h.transpose() * rinv * h;
    const VectorXd rhs = binv * xb + h.transpose() * rinv * yo;
    const VectorXd xa = lhs.fullPivLu().solve(rhs);
    EXPECT_LT((res.analysis - xa).norm(), 1e-8 * (1.0 + xa.norm()));
    const MatrixXd k = kalman_gain(h, b, r);
    EXPECT_LT((xb + k * (yo - h * xb) - res.analysis).norm(), 1e-10 * (1.0 + xa.norm()));
    EXPECT_LT(cost_gradient(res.analysis, xb, yo, h, b, r).norm(), 1e-8);
  }
}

TEST(Analysis3dVar, MinimizesCost) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index n = 5, m = 3;
    const MatrixXd b = random_spd(rng, n);
    const MatrixXd h = random_matrix(rng, m, n);
    const VectorXd r = random_vector(rng, m, 0.1, 2.0);
    const VectorXd xb = random_vector(rng, n), yo = random_vector(rng, m);
    const auto res = analysis_3dvar(xb, yo, h, b, r);
    const double best = cost_function(res.analysis, xb, yo, h, b, r);
    for (int p = 0; p < 10; ++p) {
      const VectorXd x = res.analysis + 0.1 * random_vector(rng, n);
      EXPECT_GT(cost_function(x, xb, yo, h, b, r), best);
    }
  }
}

TEST(CostGradient, MatchesFiniteDifferences) {
  Rng rng(4);
  const Eigen::Index n = 4, m = 3;
  const MatrixXd b = random_spd(rng, n);
  const MatrixXd h = random_matrix(rng, m, n);
  const VectorXd r = random_vector(rng, m, 0.1, 2.0);
  const VectorXd xb = random_vector(rng, n), yo = random_vector(rng, m);
  const VectorXd x = random_vector(rng, n);
  const VectorXd g = cost_gradient(x, xb, yo, h, b, r);
  for (Eigen::Index i = 0; i < n; ++i) {
    VectorXd up = x, down = x;
    up[i] += 1e-6;
    down[i] -= 1e-6;
    const double fd = (cost_function(up, xb, yo, h, b, r) - cost_function(down, xb, yo, h, b, r)) /
                      2e-6;
    EXPECT_NEAR(fd, g[i], 1e-6 * (1.0 + std::abs(g[i])));
  }
}

TEST(Analysis3dVar, WorthlessObservationsKeepBackground) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 6, m = 4;
    const MatrixXd b = random_spd(rng, n);
    const MatrixXd h = random_matrix(rng, m, n);
    const VectorXd xb = random_vector(rng, n), yo = random_vector(rng, m);
    const auto res = analysis_3dvar(xb, yo, h, b, VectorXd::Constant(m, 1e12));
    EXPECT_LT(res.increment.norm(), 1e-10 * (yo - h * xb).norm());
  }
}

TEST(Analysis3dVar, IncrementInColumnSpaceOfBHt) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 7, m = 2;
    const MatrixXd b = random_spd(rng, n);
    const MatrixXd h = random_matrix(rng, m, n);
    const auto res = analysis_3dvar(random_vector(rng, n), random_vector(rng, m), h, b,
                                    random_vector(rng, m, 0.1, 1.0));
    const MatrixXd bht = b * h.transpose();
    const VectorXd coef = bht.colPivHouseholderQr().solve(res.increment);
    EXPECT_LT((bht * coef - res.increment).norm(), 1e-10);
  }
}

TEST(Analysis3dVar, SingularInnovationReportsCondition) {
  MatrixXd h(2, 2);
  h << 1.0, 0.0, 1.0, 0.0;
  try {
    analysis_3dvar(vec({0, 0}), vec({1, 1}), h, MatrixXd::Identity(2, 2), vec({0.0, 0.0}));
    FAIL() << "expected SingularError";
  } catch (const SingularError& e) {
    EXPECT_LT(e.condition(), 1e-12);
  }
  EXPECT_THROW(analysis_3dvar(vec({0}), vec({1, 1}), h, MatrixXd::Identity(2, 2), vec({1, 1})),
               std::invalid_argument);
}

TEST(SingleObsIncrement, Linear) {
  Rng rng(7);
  const MatrixXd k = random_matrix(rng, 6, 3);
  const VectorXd dy = random_vector(rng, 3);
  EXPECT_EQ(single_obs_increment(k, VectorXd::Zero(3)).norm(), 0.0);
  EXPECT_LT((single_obs_increment(k, 5.0 * dy) - 5.0 * single_obs_increment(k, dy)).norm(),
            1e-14);
  EXPECT_EQ(single_obs_increment(k, -dy), -single_obs_increment(k, dy));
}

CovarianceB structured_b(std::size_t levels) {
  CovarianceB b;
  b.levels = levels;
  for (std::size_t c = 0; c < 2 * levels; ++c) b.variance.push_back(1.0 + 0.5 * c);
  return b;
}

TEST(CovarianceB, MaterializedIsSymmetricPositiveDefinite) {
  const CovarianceB b = structured_b(3);
  const StateWindow w{0, 0, 4, 5, 6};
  const MatrixXd m = b.materialize(w);
  EXPECT_LT((m - m.transpose()).norm(), 1e-12);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m);
  EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
  EXPECT_NEAR(m(static_cast<Eigen::Index>(w.index(1, 2, 3)),
                static_cast<Eigen::Index>(w.index(1, 2, 3))),
              1.5, 1e-12);
  // Temperature and humidity blocks are uncorrelated.
  EXPECT_EQ(m(static_cast<Eigen::Index>(w.index(0, 0, 0)),
              static_cast<Eigen::Index>(w.index(3, 0, 0))),
            0.0);
}

TEST(CovarianceB, RejectsBadParameters) {
  CovarianceB b = structured_b(2);
  b.vertical_rho = 1.0;
  EXPECT_THROW(b.validate(), std::invalid_argument);
  b = structured_b(2);
  b.variance[1] = 0.0;
  EXPECT_THROW(b.validate(), std::invalid_argument);
}

TEST(StructuredOperator, MatchesDenseForm) {
  Rng rng(8);
  const CovarianceB b = structured_b(2);
  LinearObsOperator h;
  h.window = StateWindow{0, 0, 3, 3, 4};
  for (int o = 0; o < 5; ++o) {
    LinearObsOperator::Row row;
    row.cell = random_between(rng, 0, 8);
    row.obs_channel = 0;
    for (int c = 0; c < 4; ++c) row.weights.push_back(rng.uniform(-1, 1));
    h.rows.push_back(row);
  }
  const VectorXd xb = random_vector(rng, 36), yo = random_vector(rng, 5);
  const VectorXd r = random_vector(rng, 5, 0.2, 1.0);
  EXPECT_LT((h.apply(xb) - h.dense() * xb).norm(), 1e-12);
  const auto a = analysis_3dvar(xb, yo, h, b, r);
  const auto d = analysis_3dvar(xb, yo, h.dense(), b.materialize(h.window), r);
  EXPECT_LT((a.analysis - d.analysis).norm(), 1e-10);
  EXPECT_LT((kalman_gain(h, b, r) - kalman_gain(h.dense(), b.materialize(h.window), r)).norm(),
            1e-10);
}

}  // namespace
}  // namespace fxda::var
