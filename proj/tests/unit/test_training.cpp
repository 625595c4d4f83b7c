// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "fxda/eval/metrics.hpp"
#include "fxda/io/binary.hpp"
#include "fxda/train/loss.hpp"
#include "fxda/train/optim.hpp"
#include "fxda/train/trainer.hpp"
#include "testing.hpp"

namespace fxda::train {
namespace {

namespace fs = std::filesystem;
using diff::Shape;
using diff::Tensor;
using testing::random_tensor;

TEST(Schedule, WarmupEndpoints) {
  const ScheduleConfig c;
  EXPECT_EQ(lr_at_step(1, c), 1e-8);
  EXPECT_EQ(lr_at_step(501, c), 2e-3);
  EXPECT_NEAR(lr_at_step(251, c), 1.000005e-3, 1e-15);
  EXPECT_NEAR(lr_at_step(502, c), 2e-3, 1e-8);
  EXPECT_NEAR(lr_at_step(2000, c), 0.0, 1e-15);
  EXPECT_THROW(lr_at_step(0, c), std::out_of_range);
  EXPECT_THROW(lr_at_step(2001, c), std::out_of_range);
}

TEST(Schedule, ContinuousAndMonotone) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    ScheduleConfig c;
    c.total_iterations = 50 + rng.below(3000);
    c.warmup_steps = rng.below(c.total_iterations - 1);
    c.eta_min = rng.uniform(0.0, 1e-4);
    const std::size_t w = c.warmup_steps;
    if (w + 2 <= c.total_iterations) {
      EXPECT_NEAR(lr_at_step(w + 1, c), c.stop_lrate, 1e-12);
      // Next step departs from the peak by at most one cosine increment.
      EXPECT_LE(lr_at_step(w + 2, c), c.stop_lrate);
    }
    for (std::size_t s = 1; s < c.total_iterations; ++s) {
      if (s <= w) {
        EXPECT_LE(lr_at_step(s, c), lr_at_step(s + 1, c));
      } else {
        EXPECT_GE(lr_at_step(s, c), lr_at_step(s + 1, c));
      }
    }
    EXPECT_NEAR(lr_at_step(c.total_iterations, c), c.eta_min, 1e-15);
  }
}

TEST(Loss, WeightedL1HandExample) {
  // Latitudes 0 and 60 degrees: weights 4/3 and 2/3.
  const std::vector<double> w{4.0 / 3.0, 2.0 / 3.0};
  Tensor pred(Shape{1, 2, 1}), truth(Shape{1, 2, 1});
  pred.at(0, 0, 0) = 3.0;
  EXPECT_NEAR(weighted_l1(pred, truth, w), 2.0, 1e-12);
  EXPECT_NEAR(eval::rmse(pred, truth, w, 0), std::sqrt(6.0), 1e-12);
  EXPECT_NEAR(weighted_l1(diff::Var(pred), truth, w).value().item(), 2.0, 1e-12);
}

TEST(Loss, WeightedL1Properties) {
  Rng rng(2);
  atm::GridSpec g;
  g.height = 8;
  g.width = 12;
  g.levels = {300.0, 700.0};
  const auto w = g.latitude_weights();
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor a = random_tensor(rng, g.state_shape());
    const Tensor b = random_tensor(rng, g.state_shape());
    const double l = weighted_l1(a, b, w);
    EXPECT_GT(l, 0.0);
    EXPECT_EQ(weighted_l1(a, a, w), 0.0);
    Tensor shifted = a;
    const double e = rng.uniform(-3, 3);
    for (auto& v : shifted.storage()) v += e;
    EXPECT_NEAR(weighted_l1(shifted, a, w), std::abs(e), 1e-12);
    // Rotating both fields in longitude leaves the loss unchanged.
    const std::size_t k = rng.below(g.width);
    Tensor ra(a.shape()), rb(b.shape());
    for (std::size_t c = 0; c < g.channels(); ++c)
      for (std::size_t i = 0; i < g.height; ++i)
        for (std::size_t j = 0; j < g.width; ++j) {
          ra.at(c, i, (j + k) % g.width) = a.at(c, i, j);
          rb.at(c, i, (j + k) % g.width) = b.at(c, i, j);
        }
    EXPECT_NEAR(weighted_l1(ra, rb, w), l, 1e-12);
    const std::vector<double> scale{1.0, 2.0, 4.0, 0.5};
    EXPECT_NEAR(weighted_l1(diff::Var(a), b, w, scale).value().item(),
                weighted_l1(a, b, w, scale), 1e-14);
  }
}

TEST(Loss, TotalLossArithmetic) {
  const std::vector<double> r{2.0, 4.0};
  EXPECT_EQ(total_loss(1.0, r), 4.0);
  EXPECT_EQ(total_loss(1.5, std::vector<double>{}), 1.5);
  const std::vector<double> same(7, 0.25);
  EXPECT_NEAR(total_loss(1.0, same), 1.25, 1e-15);
  const std::array<diff::Var, 2> vars{diff::Var(Tensor::scalar(2.0)),
                                      diff::Var(Tensor::scalar(4.0))};
  EXPECT_EQ(total_loss(diff::Var(Tensor::scalar(1.0)), vars).value().item(), 4.0);
}

TEST(AdamW, ZeroGradientDecaysExactly) {
  Rng rng(3);
  diff::Parameter p("p", random_tensor(rng, Shape{5}));
  const Tensor before = p.value();
  AdamW opt({&p}, AdamWConfig{});
  const double lr = 1e-3;
  opt.step(lr);
  for (std::size_t k = 0; k < 5; ++k) {
    EXPECT_EQ(p.value()[k], before[k] * (1.0 - lr * 1e-5));
  }
}

TEST(AdamW, FirstStepMovesBySignTimesRate) {
  Rng rng(4);
  diff::Parameter p("p", random_tensor(rng, Shape{6}));
  for (auto& g : p.grad().storage()) g = rng.uniform(-2, 2);
  const Tensor before = p.value(), grad = p.grad();
  AdamWConfig cfg;
  cfg.weight_decay = 0.0;
  AdamW opt({&p}, cfg);
  opt.step(0.01);
  for (std::size_t k = 0; k < 6; ++k) {
    const double expect = before[k] - 0.01 * grad[k] / (std::abs(grad[k]) + cfg.epsilon);
    EXPECT_NEAR(p.value()[k], expect, 1e-15);
  }
  const Tensor after = p.value();
  opt.step(0.0);
  EXPECT_EQ(p.value().storage(), after.storage());
  EXPECT_EQ(opt.steps_taken(), 2u);
}

TEST(Trainer, SampleOrderIsPermutationPerEpoch) {
  for (std::size_t batch : {1u, 2u, 3u}) {
    std::set<std::size_t> seen;
    const std::size_t n = 12;
    for (std::size_t step = 1; step <= n / batch; ++step)
      for (std::size_t slot = 0; slot < batch; ++slot)
        seen.insert(sample_for_step(5, step, slot, batch, n));
    EXPECT_EQ(seen.size(), n);
  }
  EXPECT_NE(sample_for_step(5, 1, 0, 1, 100), sample_for_step(6, 1, 0, 1, 100));
}

class TrainerTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    config_ = new data::DatasetConfig(testing::tiny_dataset());
    dataset_ = new data::Dataset(data::generate_dataset(*config_));
  }
  static void TearDownTestSuite() {
    delete dataset_;
    delete config_;
  }
  static TrainConfig small_train() {
    TrainConfig t;
    t.schedule.total_iterations = 6;
    t.schedule.warmup_steps = 2;
    t.rollout = 2;
    t.batch = 1;
    t.checkpoint_every = 3;
    return t;
  }
  static net::NetParams fresh(net::NetKind kind = net::NetKind::assimilator) {
    return net::NetParams(testing::tiny_net(*config_), kind, config_->grid);
  }
  static fs::path temp_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("fxda_train_" + name);
    fs::remove_all(d);
    return d;
  }
  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  }
  static data::DatasetConfig* config_;
  static data::Dataset* dataset_;
};
data::DatasetConfig* TrainerTest::config_ = nullptr;
data::Dataset* TrainerTest::dataset_ = nullptr;

TEST_F(TrainerTest, FirstLossIsBackgroundLoss) {
  TrainConfig t = small_train();
  t.schedule.total_iterations = 3;
  t.rollout = 0;
  const auto r = train(fresh(), *dataset_, t);
  const auto split = dataset_->split(data::Split::train);
  const auto& s = *split[sample_for_step(t.seed, 1, 0, 1, split.size())];
  const auto scale = background_error_std(*dataset_);
  const double expect = weighted_l1(s.background.fields(), dataset_->truth_at(s).fields(),
                                    config_->grid.latitude_weights(), scale);
  EXPECT_NEAR(r.history.at(0).analysis_loss, expect, 1e-12);
  EXPECT_EQ(r.history.at(0).rollout_loss, 0.0);
  EXPECT_EQ(r.history.at(0).total, r.history.at(0).analysis_loss);
}

TEST_F(TrainerTest, ParametersMove) {
  const auto init = fresh();
  const auto r = train(init, *dataset_, small_train());
  ASSERT_EQ(r.history.size(), 6u);
  EXPECT_NE(r.params.at("head.w").value().storage(), init.at("head.w").value().storage());
  for (const auto& rec : r.history) {
    EXPECT_TRUE(std::isfinite(rec.total));
    EXPECT_GT(rec.rollout_loss, 0.0);
    EXPECT_NEAR(rec.total, rec.analysis_loss + rec.rollout_loss, 1e-12);
  }
}

TEST_F(TrainerTest, DeterministicArtifacts) {
  const auto a = temp_dir("det_a"), b = temp_dir("det_b");
  train(fresh(), *dataset_, small_train(), {.out_dir = a});
  train(fresh(), *dataset_, small_train(), {.out_dir = b});
  for (const char* name : {"loss.csv", "ckpt_000003.fxc", "ckpt_000006.fxc"}) {
    ASSERT_TRUE(fs::exists(a / name)) << name;
    EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_F(TrainerTest, ResumeMatchesUninterruptedRun) {
  const auto full = temp_dir("full"), part = temp_dir("part");
  const auto ref = train(fresh(), *dataset_, small_train(), {.out_dir = full});
  const auto first = train(fresh(), *dataset_, small_train(), {.out_dir = part, .stop_after = 3});
  EXPECT_EQ(first.last_checkpoint, part / "ckpt_000003.fxc");
  const auto rest = train(fresh(), *dataset_, small_train(),
                          {.out_dir = part, .resume = first.last_checkpoint});
  for (const auto& p : ref.params.parameters()) {
    EXPECT_EQ(p.value().storage(), rest.params.at(p.name()).value().storage()) << p.name();
  }
  EXPECT_EQ(slurp(full / "loss.csv"), slurp(part / "loss.csv"));
  EXPECT_EQ(slurp(full / "ckpt_000006.fxc"), slurp(part / "ckpt_000006.fxc"));
  fs::remove_all(full);
  fs::remove_all(part);
}

TEST_F(TrainerTest, CorrectorTrainsWithoutObservations) {
  data::Dataset stripped = *dataset_;
  for (auto& s : stripped.samples) s.obs = obs::SuperObsGrid{};
  TrainConfig t = small_train();
  t.schedule.total_iterations = 3;
  const auto a = train(fresh(net::NetKind::corrector), *dataset_, t);
  const auto b = train(fresh(net::NetKind::corrector), stripped, t);
  EXPECT_EQ(a.history, b.history);
  EXPECT_EQ(a.params.normalization().bt_std, std::vector<double>(3, 1.0));
}

TEST_F(TrainerTest, NonFiniteLossAborts) {
  auto params = fresh();
  params.at("head.b").value()[0] = std::nan("");
  try {
    train(params, *dataset_, small_train());
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_EQ(e.step(), 1u);
    EXPECT_NE(std::string(e.what()).find("step 1"), std::string::npos);
  }
}

TEST_F(TrainerTest, NormalizationStatistics) {
  const auto n = compute_normalization(*dataset_);
  ASSERT_EQ(n.state_mean.size(), config_->grid.channels());
  for (double s : n.state_std) EXPECT_GT(s, 0.0);
  for (double s : n.bt_std) EXPECT_GT(s, 0.0);
  for (double m : n.bt_mean) {
    EXPECT_GT(m, 100.0);
    EXPECT_LT(m, 400.0);
  }
  for (double s : background_error_std(*dataset_)) EXPECT_GT(s, 0.0);
}

}  // namespace
}  // namespace fxda::train
