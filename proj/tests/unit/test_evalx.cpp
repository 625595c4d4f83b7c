// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "fxda/atm/model.hpp"
#include "fxda/eval/experiments.hpp"
#include "fxda/eval/metrics.hpp"
#include "testing.hpp"

namespace fxda::eval {
namespace {

namespace fs = std::filesystem;
using diff::Shape;
using diff::Tensor;
using testing::random_tensor;

atm::GridSpec grid(std::size_t h, std::size_t w) {
  atm::GridSpec g;
  g.height = h;
  g.width = w;
  return g;
}

TEST(Metrics, RmseExamples) {
  Rng rng(1);
  const auto g = grid(8, 16);
  const auto w = g.latitude_weights();
  const Tensor a = random_tensor(rng, g.state_shape());
  EXPECT_EQ(rmse(a, a, w, 3), 0.0);
  Tensor b = a;
  for (auto& v : b.storage()) v -= 0.7;
  for (std::size_t c = 0; c < g.channels(); ++c) EXPECT_NEAR(rmse(a, b, w, c), 0.7, 1e-12);
}

TEST(Metrics, RmseMatchesIndependentAccumulation) {
  Rng rng(2);
  const auto g = grid(16, 32);
  const auto lats = g.latitudes();
  double cos_sum = 0.0;
  for (double l : lats) cos_sum += std::cos(l * std::numbers::pi / 180.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor a = random_tensor(rng, g.state_shape());
    const Tensor b = random_tensor(rng, g.state_shape());
    const std::size_t c = rng.below(g.channels());
    // Column-major accumulation with weights built from scratch.
    double acc = 0.0;
    for (std::size_t j = 0; j < g.width; ++j) {
      for (std::size_t i = g.height; i-- > 0;) {
        const double alpha = g.height * std::cos(lats[i] * std::numbers::pi / 180.0) / cos_sum;
        acc += alpha * std::pow(a.at(c, i, j) - b.at(c, i, j), 2);
      }
    }
    const double expect = std::sqrt(acc / (g.height * g.width));
    const double got = rmse(a, b, g.latitude_weights(), c);
    EXPECT_NEAR(got * got, expect * expect, 1e-12);
    EXPECT_NEAR(regional_rmse(a, b, Box{0, 0, g.height, g.width}, lats, c), got, 1e-12);
  }
}

TEST(Metrics, RegionalExamples) {
  Rng rng(3);
  const auto g = grid(8, 16);
  const auto lats = g.latitudes();
  const Tensor a = random_tensor(rng, g.state_shape());
  Tensor b = a;
  b.at(2, 3, 5) += 1.5;
  EXPECT_NEAR(regional_rmse(a, b, Box{3, 5, 1, 1}, lats, 2), 1.5, 1e-15);
  for (auto& v : b.storage()) v += 0.25;
  Tensor c = a;
  for (auto& v : c.storage()) v += 0.25;
  EXPECT_NEAR(regional_rmse(a, c, Box{1, 2, 5, 7}, lats, 4), 0.25, 1e-12);
  EXPECT_THROW(regional_rmse(a, b, Box{6, 0, 4, 4}, lats, 0), std::out_of_range);
}

TEST(Metrics, NormalizedDiff) {
  EXPECT_NEAR(normalized_diff(0.9, 1.0), -0.1, 1e-15);
  EXPECT_EQ(normalized_diff(1.3, 1.3), 0.0);
  EXPECT_NEAR(normalized_diff(1.2, 1.0), 0.2, 1e-15);
  EXPECT_THROW(normalized_diff(1.0, 0.0), std::invalid_argument);
}

TEST(Metrics, RmseMapBlocks) {
  Rng rng(4);
  const auto g = grid(16, 32);
  const auto lats = g.latitudes();
  const auto w = g.latitude_weights();
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor a = random_tensor(rng, g.state_shape());
    const Tensor b = random_tensor(rng, g.state_shape());
    EXPECT_EQ(rmse_map(a, a, 0, 4, 4, lats).storage(), std::vector<double>(32, 0.0));
    const auto map = rmse_map(a, b, 1, 4, 8, lats);
    ASSERT_EQ(map.shape(), (Shape{1, 4, 4}));
    double mse = 0.0;
    for (std::size_t bi = 0; bi < 4; ++bi) {
      double block_weight = 0.0;
      for (std::size_t i = 4 * bi; i < 4 * bi + 4; ++i) block_weight += w[i];
      for (std::size_t bj = 0; bj < 4; ++bj) {
        mse += block_weight * 8 * std::pow(map.at(0, bi, bj), 2) / (g.height * g.width);
      }
    }
    EXPECT_NEAR(mse, std::pow(rmse(a, b, w, 1), 2), 1e-10);
  }
  Tensor a(g.state_shape()), b(g.state_shape());
  b.at(0, 5, 9) = 1.0;
  const auto map = rmse_map(a, b, 0, 4, 4, lats);
  std::size_t nonzero = 0;
  for (double v : map.storage()) nonzero += v != 0.0;
  EXPECT_EQ(nonzero, 1u);
  EXPECT_GT(map.at(0, 1, 2), 0.0);
  EXPECT_THROW(rmse_map(a, b, 0, 5, 4, lats), std::invalid_argument);
}

TEST(Statistics, Spearman) {
  const std::vector<double> x{1, 2, 3, 4, 5};
  EXPECT_NEAR(spearman(x, std::vector<double>{2, 4, 6, 8, 100}), 1.0, 1e-15);
  EXPECT_NEAR(spearman(x, std::vector<double>{5, 4, 3, 2, 1}), -1.0, 1e-15);
  // Ties take average ranks: ranks (1.5, 1.5, 3) vs (1, 2, 3).
  EXPECT_NEAR(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{0, 0, 1}),
              std::sqrt(0.75), 1e-12);
}

TEST(Statistics, BootstrapMean) {
  Rng rng(5);
  std::vector<double> v(200);
  for (auto& x : v) x = 1.0 + rng.normal();
  const auto ci = bootstrap_mean(v, 1000, 0.95, 11);
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  EXPECT_NEAR(ci.mean, mean, 1e-12);
  EXPECT_LT(ci.lo, mean);
  EXPECT_GT(ci.hi, mean);
  EXPECT_TRUE(ci.excludes_zero());
  // Half-width is close to 1.96 standard errors.
  EXPECT_NEAR(ci.hi - ci.lo, 2 * 1.96 / std::sqrt(200.0), 0.06);
  const auto again = bootstrap_mean(v, 1000, 0.95, 11);
  EXPECT_EQ(again.lo, ci.lo);
  EXPECT_EQ(again.hi, ci.hi);
  const std::vector<double> constant(10, 2.5);
  const auto flat = bootstrap_mean(constant, 100, 0.95, 1);
  EXPECT_EQ(flat.lo, 2.5);
  EXPECT_EQ(flat.hi, 2.5);
}

TEST(Statistics, MovingAverage) {
  const std::vector<double> v{4, 8, 0, 4, 12};
  const auto m = moving_average(v, 4);
  const std::vector<double> expect{4, 6, 4, 4, 6};
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(m[i], expect[i], 1e-15);
}

data::Sample sample_at(std::size_t id, std::size_t t) {
  data::Sample s;
  s.id = id;
  s.split = data::Split::test;
  s.time_index = t;
  return s;
}

TEST(Leakage, RejectsOverlapAndRepeats) {
  const auto a = sample_at(0, 100), b = sample_at(1, 120), dup = sample_at(1, 140);
  EXPECT_NO_THROW(check_split_leakage({&a, &b}, 8, 10, 91));
  // The background of time 100 starts from time 99.
  EXPECT_THROW(check_split_leakage({&a}, 8, 10, 100), std::invalid_argument);
  // Forecast leads reach into the training range.
  EXPECT_THROW(check_split_leakage({&a}, 8, 108, 200), std::invalid_argument);
  EXPECT_NO_THROW(check_split_leakage({&a}, 8, 109, 200));
  EXPECT_THROW(check_split_leakage({&b, &dup}, 8, 500, 600), std::invalid_argument);
}

class ExperimentTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dataset_ = new data::Dataset(data::generate_dataset(testing::tiny_dataset()));
  }
  static void TearDownTestSuite() { delete dataset_; }
  static data::Dataset* dataset_;
};
data::Dataset* ExperimentTest::dataset_ = nullptr;

TEST_F(ExperimentTest, UntrainedNetworksGiveIdenticalTables) {
  const auto& c = dataset_->config;
  const net::NetParams assi(testing::tiny_net(c), net::NetKind::assimilator, c.grid);
  const net::NetParams corr(testing::tiny_net(c), net::NetKind::corrector, c.grid);
  const auto set = run_experiments(*dataset_, &assi, &corr, 4);
  ASSERT_EQ(set.sample_ids.size(), c.n_test);
  EXPECT_EQ(set.run(Exp::ctrl).rmse, set.run(Exp::corr).rmse);
  EXPECT_EQ(set.run(Exp::ctrl).rmse, set.run(Exp::assi).rmse);
  EXPECT_EQ(set.run(Exp::ctrl).crop_rmse, set.run(Exp::assi).crop_rmse);
  EXPECT_EQ(crop_share(set, Exp::assi, Exp::corr, 1, {5, 6}, c.grid), 0.0);
}

TEST_F(ExperimentTest, ControlMatchesIndependentForecast) {
  const auto& c = dataset_->config;
  const auto set = run_experiments(*dataset_, nullptr, nullptr, 3);
  const atm::Model model(c.grid, c.forecast);
  const auto w = c.grid.latitude_weights();
  const auto test = dataset_->split(data::Split::test);
  for (std::size_t n = 0; n < test.size(); ++n) {
    const auto states = model.rollout(test[n]->background, 3);
    for (std::size_t lead = 1; lead <= 3; ++lead) {
      for (std::size_t ch = 0; ch < c.grid.channels(); ++ch) {
        EXPECT_NEAR(set.run(Exp::ctrl).rmse[n][lead][ch],
                    rmse(states.at(lead - 1).fields(), dataset_->truth_at(*test[n], lead).fields(),
                         w, ch),
                    1e-12);
      }
    }
  }
}

TEST_F(ExperimentTest, DeterministicAndReported) {
  const auto& c = dataset_->config;
  Rng rng(6);
  net::NetParams corr(testing::tiny_net(c), net::NetKind::corrector, c.grid);
  for (auto& p : corr.parameters())
    if (p.trainable())
      for (auto& v : p.value().storage()) v += rng.uniform(-0.05, 0.05);
  const auto a = run_experiments(*dataset_, nullptr, &corr, 4, data::Split::valid);
  const auto b = run_experiments(*dataset_, nullptr, &corr, 4, data::Split::valid);
  EXPECT_EQ(a.run(Exp::corr).rmse, b.run(Exp::corr).rmse);
  EXPECT_NE(a.run(Exp::corr).rmse, a.run(Exp::ctrl).rmse);
  const auto s = summarize(a, c.grid, 200, 0.95, 3);
  EXPECT_EQ(s.lead_diff.size(), 5u);
  EXPECT_EQ(s.crop_share.size(), 5u);
  EXPECT_TRUE(to_json(s).contains("lead_spearman"));

  const fs::path dir = fs::temp_directory_path() / "fxda_evalx_reports";
  fs::remove_all(dir);
  write_reports(a, c.grid, dir);
  std::ifstream nd(dir / "normalized_diff.csv");
  std::string header;
  std::getline(nd, header);
  std::size_t rows = 0;
  for (std::string line; std::getline(nd, line);) ++rows;
  EXPECT_EQ(rows, c.grid.channels() * 5);
  EXPECT_TRUE(fs::exists(dir / "rmse.csv"));
  EXPECT_TRUE(fs::exists(dir / "regional.csv"));
  std::ifstream pgm(dir / "improvement_Q500_lead1.pgm", std::ios::binary);
  std::string magic;
  std::size_t w = 0, h = 0;
  pgm >> magic >> w >> h;
  EXPECT_EQ(magic, "P5");
  EXPECT_EQ(w * h, c.grid.width * c.grid.height / 16);
  fs::remove_all(dir);
}

TEST_F(ExperimentTest, RejectsBadRequests) {
  const auto& c = dataset_->config;
  const net::NetParams corr(testing::tiny_net(c), net::NetKind::corrector, c.grid);
  EXPECT_THROW(run_experiments(*dataset_, &corr, nullptr, 2), std::invalid_argument);
  EXPECT_THROW(run_experiments(*dataset_, nullptr, nullptr, c.max_lead + 1), std::invalid_argument);
}

TEST(CropShare, ReductionInsideCrop) {
  const auto g = grid(8, 8);
  ExperimentSet set;
  set.crop = Box{2, 2, 4, 4};
  for (auto& run : set.runs) run.squared_error.assign(1, Tensor(g.state_shape()));
  auto& ref = set.runs[1].squared_error[0];
  for (auto& v : ref.storage()) v = 1.0;
  auto& better = set.runs[2].squared_error[0];
  better = ref;
  better.at(5, 3, 3) = 0.0;
  EXPECT_NEAR(crop_share(set, Exp::assi, Exp::corr, 0, {5}, g), 1.0, 1e-15);
  better.at(5, 0, 0) = 0.0;
  const auto w = g.latitude_weights();
  EXPECT_NEAR(crop_share(set, Exp::assi, Exp::corr, 0, {5}, g), w[3] / (w[3] + w[0]), 1e-15);
}

}  // namespace
}  // namespace fxda::eval
