// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#include "fxda/data/store.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <utility>

#include <nlohmann/json.hpp>

#include "fxda/io/binary.hpp"
#include "fxda/parallel.hpp"

namespace fxda::data {
namespace fs = std::filesystem;

namespace {

std::string numbered(const char* prefix, std::size_t id, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%06zu.%s", prefix, id, ext);
  return buf;
}

[[noreturn]] void mismatch(const fs::path& dir, const std::string& what) {
  throw std::runtime_error("dataset '" + dir.string() + "' does not match the config: " + what);
}

}  // namespace

std::size_t stored_truth_begin(const DatasetConfig& config) {
  return config.split_begin(Split::train) - 1;
}

void save_dataset(const Dataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  const std::size_t begin = stored_truth_begin(ds.config);
  const std::size_t steps = ds.truth.size() - begin;
  const auto& grid = ds.config.grid;
  diff::Tensor truth(diff::Shape{steps, grid.channels(), grid.height, grid.width});
  const std::size_t plane = grid.channels() * grid.height * grid.width;
  for (std::size_t t = 0; t < steps; ++t) {
    const auto& f = ds.truth[begin + t].fields();
    std::copy(f.data(), f.data() + plane, truth.data() + t * plane);
  }
  io::write_grid(dir / "truth.fxg", truth);
  parallel_for(ds.samples.size(), [&](std::size_t n) {
    const auto& s = ds.samples[n];
    io::write_grid(dir / numbered("bg", s.id, "fxg"), s.background.fields());
    io::write_obs(dir / numbered("obs", s.id, "fxo"), s.obs);
  });
  std::ofstream csv(dir / "samples.csv");
  csv << "id,split,time_index\n";
  for (const auto& s : ds.samples) {
    csv << s.id << ',' << split_name(s.split) << ',' << s.time_index << '\n';
  }
  nlohmann::json meta{{"format", 1},
                      {"seed", ds.config.seed},
                      {"truth_begin", begin},
                      {"truth_steps", steps},
                      {"n_train", ds.config.n_train},
                      {"n_valid", ds.config.n_valid},
                      {"n_test", ds.config.n_test}};
  std::ofstream(dir / "dataset.json") << meta.dump(2) << '\n';
}

Dataset load_dataset(const fs::path& dir, const DatasetConfig& config, bool observations) {
  config.validate();
  if (!fs::is_directory(dir)) {
    throw std::runtime_error("dataset directory '" + dir.string() + "' does not exist");
  }
  std::ifstream meta_in(dir / "dataset.json");
  if (!meta_in) throw std::runtime_error("dataset '" + dir.string() + "' has no dataset.json");
  const auto meta = nlohmann::json::parse(meta_in);
  if (meta.at("seed").get<std::uint64_t>() != config.seed) mismatch(dir, "seed differs");
  const std::pair<const char*, std::size_t> counts[] = {
      {"n_train", config.n_train}, {"n_valid", config.n_valid}, {"n_test", config.n_test}};
  for (const auto& [key, want] : counts) {
    if (meta.at(key).get<std::size_t>() != want) mismatch(dir, std::string(key) + " differs");
  }
  Dataset ds;
  ds.config = config;
  const std::size_t begin = stored_truth_begin(config);
  if (meta.at("truth_begin").get<std::size_t>() != begin) mismatch(dir, "split layout differs");
  const auto truth = io::read_grid(dir / "truth.fxg");
  const auto& grid = config.grid;
  const diff::Shape expect{config.trajectory_length() - begin, grid.channels(), grid.height,
                           grid.width};
  if (truth.shape() != expect) {
    mismatch(dir, "truth extents " + diff::to_string(truth.shape()) + ", expected " +
                      diff::to_string(expect));
  }
  ds.truth.resize(config.trajectory_length());
  const std::size_t plane = grid.channels() * grid.height * grid.width;
  for (std::size_t t = begin; t < ds.truth.size(); ++t) {
    diff::Tensor f(grid.state_shape());
    const double* src = truth.data() + (t - begin) * plane;
    std::copy(src, src + plane, f.data());
    ds.truth[t] = atm::GridState(std::move(f));
  }

  std::ifstream csv(dir / "samples.csv");
  if (!csv) throw std::runtime_error("dataset '" + dir.string() + "' has no samples.csv");
  std::string line;
  std::getline(csv, line);
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string id, split, time;
    std::getline(row, id, ',');
    std::getline(row, split, ',');
    std::getline(row, time, ',');
    Sample s;
    s.id = std::stoul(id);
    s.split = parse_split(split);
    s.time_index = std::stoul(time);
    ds.samples.push_back(std::move(s));
  }
  if (ds.samples.size() != config.sample_count()) {
    mismatch(dir, std::to_string(ds.samples.size()) + " samples, expected " +
                      std::to_string(config.sample_count()));
  }
  parallel_for(ds.samples.size(), [&](std::size_t n) {
    auto& s = ds.samples[n];
    s.background = atm::GridState(io::read_grid(dir / numbered("bg", s.id, "fxg")));
    if (observations) s.obs = io::read_obs(dir / numbered("obs", s.id, "fxo"));
  });
  for (const auto& s : ds.samples) {
    if (s.background.fields().shape() != grid.state_shape()) {
      mismatch(dir, "background " + std::to_string(s.id) + " has the wrong extents");
    }
    if (s.time_index >= ds.truth.size() || s.time_index < begin + 1) {
      mismatch(dir, "sample " + std::to_string(s.id) + " time index out of range");
    }
  }
  return ds;
}

}  // namespace fxda::data
