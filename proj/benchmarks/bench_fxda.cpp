// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "fxda/atm/model.hpp"
#include "fxda/data/dataset.hpp"
#include "fxda/diff/graph.hpp"
#include "fxda/diff/ops.hpp"
#include "fxda/net/danet.hpp"
#include "fxda/rng.hpp"
#include "fxda/train/trainer.hpp"
#include "fxda/var/oracle.hpp"

namespace {

using namespace fxda;

diff::Tensor random_tensor(Rng& rng, diff::Shape shape) {
  diff::Tensor t(std::move(shape));
  for (auto& v : t.storage()) v = rng.uniform(-1.0, 1.0);
  return t;
}

data::DatasetConfig small_dataset() {
  data::DatasetConfig c;
  c.grid.height = 32;
  c.grid.width = 64;
  c.obs.crop = obs::Crop{8, 24, 16, 16};
  c.n_train = 4;
  c.n_valid = 1;
  c.n_test = 1;
  c.spinup = 15;
  c.gap = 10;
  return c;
}

void BM_Conv2dForwardBackward(benchmark::State& state) {
  Rng rng(1);
  const auto c = static_cast<std::size_t>(state.range(0));
  diff::Parameter x("x", random_tensor(rng, {c, 32, 32}));
  diff::Parameter k("k", random_tensor(rng, {c, c, 3, 3}));
  diff::Parameter b("b", random_tensor(rng, {c}));
  for (auto _ : state) {
    x.zero_grad();
    k.zero_grad();
    b.zero_grad();
    diff::backward(diff::sum(diff::conv2d(x.var(), k.var(), b.var(), 1, diff::Padding::same)));
  }
}
BENCHMARK(BM_Conv2dForwardBackward)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_ModelStep(benchmark::State& state) {
  const atm::GridSpec grid;
  const atm::Model model(grid, atm::ModelConfig{});
  atm::GridState s(grid);
  s.fields() = model.climatology();
  for (auto _ : state) benchmark::DoNotOptimize(model.step(s));
}
BENCHMARK(BM_ModelStep)->Unit(benchmark::kMillisecond);

void BM_AssimilatorForward(benchmark::State& state) {
  const auto ds = data::generate_dataset(small_dataset());
  net::NetConfig nc;
  nc.crop = ds.config.obs.crop;
  nc.margin = 3;
  const net::NetParams p(nc, net::NetKind::assimilator, ds.config.grid);
  const auto& sample = ds.samples.front();
  for (auto _ : state) benchmark::DoNotOptimize(net::forward(p, sample.background, sample.obs));
}
BENCHMARK(BM_AssimilatorForward)->Unit(benchmark::kMillisecond);

void BM_TrainingSampleLoss(benchmark::State& state) {
  const auto ds = data::generate_dataset(small_dataset());
  net::NetConfig nc;
  nc.crop = ds.config.obs.crop;
  nc.margin = 3;
  net::NetParams p(nc, net::NetKind::assimilator, ds.config.grid);
  p.set_normalization(train::compute_normalization(ds));
  const atm::Model forecast(ds.config.grid, ds.config.forecast);
  const auto scale = train::background_error_std(ds);
  const auto rollout = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    p.zero_grad();
    auto loss = train::sample_loss(p, ds.samples.front(), ds, forecast, rollout, 0, scale);
    diff::backward(loss.total);
  }
}
BENCHMARK(BM_TrainingSampleLoss)->Arg(0)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_Analysis3dVar(benchmark::State& state) {
  Rng rng(2);
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const Eigen::Index m = n / 4;
  Eigen::MatrixXd a(n, n), h(m, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = rng.uniform(-1, 1);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) h(i, j) = rng.uniform(-1, 1);
  const Eigen::MatrixXd b = a * a.transpose() + Eigen::MatrixXd::Identity(n, n);
  const Eigen::VectorXd xb = Eigen::VectorXd::Zero(n), yo = Eigen::VectorXd::Ones(m);
  const Eigen::VectorXd r = Eigen::VectorXd::Constant(m, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(var::analysis_3dvar(xb, yo, h, b, r));
}
BENCHMARK(BM_Analysis3dVar)->Arg(64)->Arg(512)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
