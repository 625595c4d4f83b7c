// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>

#include "fxda/data/dataset.hpp"

namespace fxda::data {

/// Writes truth.fxg (the trajectory from the first time a background
/// depends on), bg_<id>.fxg, obs_<id>.fxo, samples.csv and dataset.json.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);

/// Reads a directory written by save_dataset. The trajectory entries before
/// the stored range are left empty. Throws std::runtime_error when the files
/// disagree with `config`. Without `observations` no obs file is opened and
/// every sample carries an empty SuperObsGrid.
Dataset load_dataset(const std::filesystem::path& dir, const DatasetConfig& config,
                     bool observations = true);

/// First trajectory index kept on disk.
std::size_t stored_truth_begin(const DatasetConfig& config);

}  // namespace fxda::data
