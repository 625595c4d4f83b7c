// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fxda/atm/model.hpp"
#include "fxda/data/dataset.hpp"
#include "fxda/net/danet.hpp"
#include "fxda/train/optim.hpp"

namespace fxda::train {

struct TrainConfig {
  ScheduleConfig schedule;
  AdamWConfig adam;
  std::size_t rollout = 4;  // T
  /// Forecast steps the gradient flows through; 0 means all of them.
  std::size_t backprop_steps = 0;
  std::size_t batch = 2;
  std::uint64_t seed = 1;
  std::size_t checkpoint_every = 500;

  void validate() const;
};

struct TrainRecord {
  std::size_t step = 0;
  double lr = 0.0;
  double analysis_loss = 0.0;
  double rollout_loss = 0.0;  // mean over lead times, 0 when T = 0
  double total = 0.0;
  friend bool operator==(const TrainRecord&, const TrainRecord&) = default;
};

struct TrainOptions {
  /// Directory for loss.csv and checkpoints; empty keeps everything in memory.
  std::filesystem::path out_dir;
  /// Checkpoint to continue from.
  std::filesystem::path resume;
  /// Stop after this step (0 = run to the end); used to emulate interruption.
  std::size_t stop_after = 0;
  std::function<void(const TrainRecord&)> on_step;
};

struct TrainResult {
  net::NetParams params;
  std::vector<TrainRecord> history;
  std::filesystem::path last_checkpoint;
};

/// Raised on a non-finite loss.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, std::size_t step, std::filesystem::path checkpoint)
      : std::runtime_error(what), step_(step), checkpoint_(std::move(checkpoint)) {}
  std::size_t step() const { return step_; }
  const std::filesystem::path& checkpoint() const { return checkpoint_; }

 private:
  std::size_t step_;
  std::filesystem::path checkpoint_;
};

/// Channel means and standard deviations of the training backgrounds and
/// of the valid training super-observations. Without observations the
/// brightness-temperature statistics are 0 and 1.
net::Normalization compute_normalization(const data::Dataset& dataset, bool include_obs = true);

/// Per-channel standard deviation of background minus truth over the
/// training split; used to balance channels in the loss.
std::vector<double> background_error_std(const data::Dataset& dataset);

/// Sample index (into the training split) used at a 1-based step and batch slot.
std::size_t sample_for_step(std::uint64_t seed, std::size_t step, std::size_t slot,
                            std::size_t batch, std::size_t n_train);

/// One loss evaluation for a sample; builds the graph when `graph` is set.
struct SampleLoss {
  diff::Var total;
  double analysis = 0.0;
  double rollout = 0.0;
};
SampleLoss sample_loss(const net::NetParams& params, const data::Sample& sample,
                       const data::Dataset& dataset, const atm::Model& forecast,
                       std::size_t rollout, std::size_t backprop_steps,
                       const std::vector<double>& channel_scale);

TrainResult train(net::NetParams params, const data::Dataset& dataset,
                  const TrainConfig& config, const TrainOptions& options = {});

/// Rounds parameter values through float.
void quantize(net::NetParams& params);

std::string format_record(const TrainRecord& r);
inline constexpr const char* kLossHeader = "step,lr,analysis_loss,rollout_loss,total";

}  // namespace fxda::train
