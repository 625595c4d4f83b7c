// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fxda/atm/grid.hpp"
#include "fxda/atm/model.hpp"
#include "fxda/atm/noise.hpp"
#include "fxda/obs/synth.hpp"

namespace fxda::data {

/// The "true" atmosphere differs from the forecast model by its own
/// parameters and a stochastic forcing drawn every step.
struct TruthConfig {
  atm::ModelConfig dynamics = default_truth_dynamics();
  double forcing_t = 0.4;
  double forcing_q = 2.0;
  double forcing_length = 6.0;
  /// Truth evolves with the forecast model and no forcing.
  bool perfect_model = false;

  static atm::ModelConfig default_truth_dynamics();
};

struct BackgroundConfig {
  double amplitude = 1.0;
  double t_std = 1.0;
  double q_std = 5.0;
  double length_scale = 4.0;
  double vertical_rho = 0.36787944117144233;
};

enum class Split { train, valid, test };
const char* split_name(Split split);
Split parse_split(const std::string& name);

struct DatasetConfig {
  atm::GridSpec grid;
  atm::ModelConfig forecast;
  TruthConfig truth;
  BackgroundConfig background;
  obs::SynthConfig obs;
  std::size_t n_train = 512;
  std::size_t n_valid = 64;
  std::size_t n_test = 128;
  std::size_t spinup = 200;
  std::size_t gap = 20;
  std::size_t max_lead = 8;
  std::uint64_t seed = 20220601;
  int start_year = 2022;
  unsigned start_month = 6;
  unsigned start_day = 1;

  void validate() const;
  std::size_t sample_count() const { return n_train + n_valid + n_test; }
  std::size_t trajectory_length() const;
  /// First trajectory index of a split.
  std::size_t split_begin(Split split) const;
  std::size_t split_size(Split split) const;
  std::int64_t epoch_minutes_at(std::size_t time_index) const;
  atm::NoiseSpec background_noise() const;
};

/// One analysis time. `id` is global across splits.
struct Sample {
  std::size_t id = 0;
  Split split = Split::train;
  std::size_t time_index = 0;
  atm::GridState background;
  obs::SuperObsGrid obs;
  friend bool operator==(const Sample&, const Sample&) = default;
};

/// All values are rounded to 32-bit precision so that the in-memory copy
/// equals what the files hold.
struct Dataset {
  DatasetConfig config;
  std::vector<atm::GridState> truth;  // full trajectory
  std::vector<Sample> samples;

  const atm::GridState& truth_at(const Sample& s, std::size_t lead = 0) const;
  std::vector<const Sample*> split(Split split) const;
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

Dataset generate_dataset(const DatasetConfig& config);

/// Rounds every value through float.
void quantize(diff::Tensor& t);

/// Builds the background for a truth state at `time_index`.
atm::GridState make_background(const atm::Model& forecast, const atm::GridState& truth_prev,
                               const DatasetConfig& config, std::size_t time_index);

}  // namespace fxda::data
