// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fxda/cli/config.hpp"
#include "fxda/eval/experiments.hpp"
#include "fxda/perturb/perturb.hpp"
#include "fxda/train/trainer.hpp"

namespace fxda::cli {

/// Paths to the inputs of a command. An empty dataset path falls back to
/// the config's dataset.dir.
struct Inputs {
  std::filesystem::path dataset;
  std::vector<std::filesystem::path> checkpoints;
  std::filesystem::path resume;
  std::filesystem::path spec;
  std::optional<std::size_t> sample;
};

void cmd_generate(const RunConfig& config, const std::filesystem::path& out);

train::TrainResult cmd_train(const RunConfig& config, const Inputs& inputs,
                             const std::filesystem::path& out, net::NetKind mode);

eval::ExperimentSet cmd_evaluate(const RunConfig& config, const Inputs& inputs,
                                 const std::filesystem::path& out);

/// Without a checkpoint the oracle answers. A spec file lists explicit
/// cases; otherwise the full battery runs.
perturb::BatteryReport cmd_perturb(const RunConfig& config, const Inputs& inputs,
                                   const std::filesystem::path& out);

/// Per-channel crop RMSE of background, oracle analysis and, when a
/// checkpoint is given, the network analysis.
void cmd_oracle(const RunConfig& config, const Inputs& inputs, const std::filesystem::path& out);

net::NetParams load_network(const RunConfig& config, const std::filesystem::path& checkpoint);

/// Perturbation cases from CSV: id,row,col,channel,magnitude,window,sky.
std::vector<perturb::PerturbSpec> read_specs(const std::filesystem::path& path);

/// manifest.json with the command, the resolved config and the checksums
/// of inputs and outputs.
void write_manifest(const std::filesystem::path& out, const std::string& command,
                    const RunConfig& config, const nlohmann::json& inputs,
                    const nlohmann::json& extra = nlohmann::json::object());

}  // namespace fxda::cli
