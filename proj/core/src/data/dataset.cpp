// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#include "fxda/data/dataset.hpp"

#include <stdexcept>

#include "fxda/parallel.hpp"
#include "fxda/rng.hpp"

namespace fxda::data {
namespace {

enum Stream : std::uint64_t { kInit = 1, kForcing = 2, kBackground = 3, kObs = 4 };

}  // namespace

atm::ModelConfig TruthConfig::default_truth_dynamics() {
  atm::ModelConfig c;
  c.coupling = 0.15;
  c.source_t = {0.15, 0.1, 0.0, -0.1, -0.15};
  c.source_q = {1.0, 0.6, 0.0, -0.6, -1.0};
  return c;
}

const char* split_name(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "valid") return Split::valid;
  if (name == "test") return Split::test;
  throw std::invalid_argument("unknown split '" + name + "'");
}

void DatasetConfig::validate() const {
  grid.validate();
  obs.validate(grid);
  atm::Model check_forecast(grid, forecast);
  atm::Model check_truth(grid, truth.dynamics);
  if (sample_count() == 0) throw std::invalid_argument("dataset: count must be >= 1");
  if (spinup < 1) throw std::invalid_argument("dataset: spinup must be >= 1");
  if (!(background.amplitude >= 0.0)) {
    throw std::invalid_argument("dataset: perturbation amplitude must be >= 0");
  }
}

std::size_t DatasetConfig::trajectory_length() const {
  return split_begin(Split::test) + n_test + max_lead;
}

std::size_t DatasetConfig::split_begin(Split split) const {
  switch (split) {
    case Split::train: return spinup;
    case Split::valid: return spinup + n_train + gap;
    case Split::test: return spinup + n_train + gap + n_valid + gap;
  }
  return 0;
}

std::size_t DatasetConfig::split_size(Split split) const {
  switch (split) {
    case Split::train: return n_train;
    case Split::valid: return n_valid;
    case Split::test: return n_test;
  }
  return 0;
}

std::int64_t DatasetConfig::epoch_minutes_at(std::size_t time_index) const {
  return obs::epoch_minutes_of(start_year, start_month, start_day) +
         static_cast<std::int64_t>(time_index) *
             static_cast<std::int64_t>(atm::kMinutesPerStep);
}

atm::NoiseSpec DatasetConfig::background_noise() const {
  atm::NoiseSpec spec;
  spec.length_scale = background.length_scale;
  spec.vertical_rho = background.vertical_rho;
  const std::size_t levels = grid.level_count();
  spec.channel_std.assign(2 * levels, 0.0);
  for (std::size_t l = 0; l < levels; ++l) {
    spec.channel_std[grid.t_channel(l)] = background.amplitude * background.t_std;
    spec.channel_std[grid.q_channel(l)] = background.amplitude * background.q_std;
  }
  return spec;
}

const atm::GridState& Dataset::truth_at(const Sample& s, std::size_t lead) const {
  const std::size_t t = s.time_index + lead;
  if (t >= truth.size()) {
    throw std::out_of_range("dataset: lead " + std::to_string(lead) +
                            " runs past the stored trajectory");
  }
  return truth[t];
}

std::vector<const Sample*> Dataset::split(Split which) const {
  std::vector<const Sample*> out;
  for (const auto& s : samples) {
    if (s.split == which) out.push_back(&s);
  }
  return out;
}

void quantize(diff::Tensor& t) {
  for (double& v : t.values()) v = static_cast<double>(static_cast<float>(v));
}

atm::GridState make_background(const atm::Model& forecast, const atm::GridState& truth_prev,
                               const DatasetConfig& config, std::size_t time_index) {
  atm::GridState start = truth_prev;
  if (config.background.amplitude > 0.0) {
    Rng rng(derive_seed(config.seed, kBackground, time_index));
    const auto noise = atm::correlated_noise(config.grid, config.background_noise(), rng);
    for (std::size_t i = 0; i < noise.numel(); ++i) start.fields()[i] += noise[i];
  }
  atm::GridState bg = forecast.step(start);
  quantize(bg.fields());
  return bg;
}

Dataset generate_dataset(const DatasetConfig& config) {
  config.validate();
  const atm::GridSpec& grid = config.grid;
  const atm::Model forecast(grid, config.forecast);
  const atm::Model truth_model(grid, config.truth.perfect_model ? config.forecast
                                                                : config.truth.dynamics);

  Dataset ds;
  ds.config = config;
  const std::size_t length = config.trajectory_length();
  ds.truth.reserve(length);

  // Spin up from climatology plus a large correlated anomaly.
  atm::GridState state(truth_model.climatology());
  {
    Rng rng(derive_seed(config.seed, kInit));
    atm::NoiseSpec init = config.background_noise();
    init.length_scale = 8.0;
    for (std::size_t c = 0; c < grid.channels(); ++c) {
      init.channel_std[c] = c < grid.level_count() ? 3.0 : 10.0;
    }
    const auto noise = atm::correlated_noise(grid, init, rng);
    for (std::size_t i = 0; i < noise.numel(); ++i) state.fields()[i] += noise[i];
  }
  atm::NoiseSpec forcing_spec;
  forcing_spec.length_scale = config.truth.forcing_length;
  forcing_spec.channel_std.assign(grid.channels(), 0.0);
  for (std::size_t l = 0; l < grid.level_count(); ++l) {
    forcing_spec.channel_std[grid.t_channel(l)] = config.truth.forcing_t;
    forcing_spec.channel_std[grid.q_channel(l)] = config.truth.forcing_q;
  }
  for (std::size_t t = 0; t < length; ++t) {
    if (t > 0) {
      if (config.truth.perfect_model) {
        state = truth_model.step(state);
      } else {
        Rng rng(derive_seed(config.seed, kForcing, t));
        const auto forcing = atm::correlated_noise(grid, forcing_spec, rng);
        state = truth_model.step(state, &forcing);
      }
    }
    atm::GridState stored = state;
    quantize(stored.fields());
    ds.truth.push_back(std::move(stored));
  }

  ds.samples.resize(config.sample_count());
  std::size_t id = 0;
  for (Split split : {Split::train, Split::valid, Split::test}) {
    for (std::size_t k = 0; k < config.split_size(split); ++k, ++id) {
      ds.samples[id].id = id;
      ds.samples[id].split = split;
      ds.samples[id].time_index = config.split_begin(split) + k;
    }
  }
  parallel_for(ds.samples.size(), [&](std::size_t n) {
    Sample& s = ds.samples[n];
    s.background = make_background(forecast, ds.truth[s.time_index - 1], config, s.time_index);
    auto synth = obs::synthesize_observations(
        ds.truth[s.time_index], grid, config.obs, config.epoch_minutes_at(s.time_index),
        derive_seed(config.seed, kObs, s.time_index));
    s.obs = std::move(synth.grid);
    quantize(s.obs.bt);
    quantize(s.obs.aux);
    quantize(s.obs.cloud_fraction);
  });
  return ds;
}

}  // namespace fxda::data
