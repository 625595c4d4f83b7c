// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "fxda/data/dataset.hpp"
#include "fxda/net/danet.hpp"
#include "fxda/perturb/perturb.hpp"
#include "fxda/train/trainer.hpp"

namespace fxda::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EvalConfig {
  std::size_t max_lead = 8;
  data::Split split = data::Split::test;
  std::size_t block = 4;
  std::size_t bootstrap = 1000;
  double level = 0.95;
  std::uint64_t seed = 11;
};

struct OracleConfig {
  double obs_variance = 1.0;
  std::size_t tile = 8;
  std::size_t halo = 4;
  bool skip_cloudy = true;
};

struct PerturbConfig {
  /// Index into the evaluation split.
  std::size_t sample = 0;
  perturb::BatteryConfig battery;
};

/// Everything a command needs. The network's channel, frame and crop
/// settings follow the dataset.
struct RunConfig {
  data::DatasetConfig dataset;
  std::string dataset_dir = "data";
  std::array<std::size_t, 3> widths{32, 64, 32};
  std::size_t margin = 4;
  std::uint64_t net_seed = 7;
  train::TrainConfig train;
  EvalConfig eval;
  OracleConfig oracle;
  PerturbConfig perturb;

  net::NetConfig net() const;
  void validate() const;
};

/// INI text with [section] headers and key = value lines; lists are comma
/// separated. Keys not set keep their defaults; unknown sections or keys
/// throw ConfigError.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Every key, with doubles printed to round-trip exactly.
std::string to_ini(const RunConfig& config);
void write_config(const RunConfig& config, const std::filesystem::path& path);

/// Names of all sections and their keys in output order.
std::vector<std::pair<std::string, std::string>> config_keys();

}  // namespace fxda::cli
