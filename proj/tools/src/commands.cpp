// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#include "fxda/cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "fxda/data/store.hpp"
#include "fxda/eval/metrics.hpp"
#include "fxda/io/binary.hpp"
#include "fxda/var/oracle.hpp"

#ifndef FXDA_VERSION
#define FXDA_VERSION "unknown"
#endif

namespace fxda::cli {
namespace fs = std::filesystem;

namespace {

fs::path dataset_path(const RunConfig& config, const Inputs& inputs) {
  return inputs.dataset.empty() ? fs::path(config.dataset_dir) : inputs.dataset;
}

data::Dataset open_dataset(const RunConfig& config, const Inputs& inputs, bool observations) {
  return data::load_dataset(dataset_path(config, inputs), config.dataset, observations);
}

nlohmann::json dataset_input(const RunConfig& config, const Inputs& inputs) {
  const fs::path dir = dataset_path(config, inputs);
  return {{"path", dir.string()}, {"crc32", io::hex32(io::directory_crc32(dir))}};
}

nlohmann::json checkpoint_inputs(const std::vector<fs::path>& paths) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : paths) {
    out.push_back({{"path", p.string()}, {"crc32", io::hex32(io::file_crc32(p))}});
  }
  return out;
}

/// Command line that reproduces a run from its output directory.
std::string rerun_line(const std::string& command, const fs::path& out,
                       const std::vector<std::pair<std::string, std::string>>& flags) {
  const fs::path dir = fs::absolute(out);
  std::string line = "fxda " + command + " --config " + (dir / "config.resolved.ini").string() +
                     " --out " + dir.string();
  for (const auto& [flag, value] : flags) line += " --" + flag + " " + value;
  return line;
}

std::vector<std::pair<std::string, std::string>> input_flags(const RunConfig& config,
                                                             const Inputs& inputs) {
  std::vector<std::pair<std::string, std::string>> flags{
      {"dataset", fs::absolute(dataset_path(config, inputs)).string()}};
  for (const auto& c : inputs.checkpoints) flags.emplace_back("checkpoint", fs::absolute(c).string());
  if (!inputs.spec.empty()) flags.emplace_back("spec", fs::absolute(inputs.spec).string());
  if (inputs.sample) flags.emplace_back("sample", std::to_string(*inputs.sample));
  return flags;
}

const data::Sample& pick_sample(const data::Dataset& ds, const RunConfig& config,
                                const Inputs& inputs) {
  if (inputs.sample) {
    for (const auto& s : ds.samples) {
      if (s.id == *inputs.sample) return s;
    }
    throw std::invalid_argument("sample " + std::to_string(*inputs.sample) + " does not exist");
  }
  const auto split = ds.split(config.eval.split);
  if (config.perturb.sample >= split.size()) {
    throw std::invalid_argument("perturb.sample " + std::to_string(config.perturb.sample) +
                                " exceeds the " + data::split_name(config.eval.split) +
                                " split size " + std::to_string(split.size()));
  }
  return *split[config.perturb.sample];
}

perturb::OracleSetup oracle_setup(const RunConfig& config, const data::Dataset& ds) {
  auto setup = perturb::make_oracle_setup(ds);
  setup.r.variance.assign(setup.channels.size(), config.oracle.obs_variance);
  return setup;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9e", v);
  return buf;
}

}  // namespace

void write_manifest(const fs::path& out, const std::string& command, const RunConfig& config,
                    const nlohmann::json& inputs, const nlohmann::json& extra) {
  fs::create_directories(out);
  write_config(config, out / "config.resolved.ini");
  nlohmann::json outputs = nlohmann::json::object();
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(out)) {
    if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    outputs[fs::relative(f, out).generic_string()] = io::hex32(io::file_crc32(f));
  }
  nlohmann::json m{{"command", command},
                   {"version", FXDA_VERSION},
                   {"config", "config.resolved.ini"},
                   {"rerun", "fxda " + command + " --config config.resolved.ini"},
                   {"inputs", inputs},
                   {"outputs", outputs}};
  for (const auto& [k, v] : extra.items()) m[k] = v;
  std::ofstream(out / "manifest.json") << m.dump(2) << '\n';
}

void cmd_generate(const RunConfig& config, const fs::path& out) {
  config.validate();
  const auto ds = data::generate_dataset(config.dataset);
  data::save_dataset(ds, out);
  write_manifest(out, "generate", config, nlohmann::json::object(),
                 {{"seed", config.dataset.seed},
                  {"samples", ds.samples.size()},
                  {"rerun", rerun_line("generate", out, {})}});
}

net::NetParams load_network(const RunConfig& config, const fs::path& checkpoint) {
  const auto ckpt = io::read_checkpoint(checkpoint);
  if (!ckpt.meta.contains("kind")) {
    throw std::runtime_error("checkpoint '" + checkpoint.string() + "' has no network kind");
  }
  net::NetParams params(config.net(), net::parse_kind(ckpt.meta.at("kind").get<std::string>()),
                        config.dataset.grid);
  params.load(ckpt);
  return params;
}

train::TrainResult cmd_train(const RunConfig& config, const Inputs& inputs, const fs::path& out,
                             net::NetKind mode) {
  config.validate();
  const bool observations = mode == net::NetKind::assimilator;
  const auto ds = open_dataset(config, inputs, observations);
  net::NetParams params(config.net(), mode, config.dataset.grid);
  train::TrainOptions options;
  options.out_dir = out;
  options.resume = inputs.resume;
  auto result = train::train(std::move(params), ds, config.train, options);
  const fs::path model = out / "model.fxc";
  io::write_checkpoint(model, result.params.to_checkpoint());
  nlohmann::json in{{"dataset", dataset_input(config, inputs)}};
  if (!inputs.resume.empty()) in["resume"] = checkpoint_inputs({inputs.resume});
  auto flags = input_flags(config, inputs);
  flags.emplace_back("mode", net::kind_name(mode));
  if (!inputs.resume.empty()) flags.emplace_back("checkpoint", fs::absolute(inputs.resume).string());
  write_manifest(out, "train", config, in,
                 {{"mode", net::kind_name(mode)},
                  {"seed", config.train.seed},
                  {"rerun", rerun_line("train", out, flags)}});
  return result;
}

eval::ExperimentSet cmd_evaluate(const RunConfig& config, const Inputs& inputs,
                                 const fs::path& out) {
  config.validate();
  std::optional<net::NetParams> assi, corr;
  for (const auto& path : inputs.checkpoints) {
    auto params = load_network(config, path);
    auto& slot = params.kind() == net::NetKind::assimilator ? assi : corr;
    if (slot) {
      throw std::invalid_argument("evaluate: two " + std::string(net::kind_name(params.kind())) +
                                  " checkpoints given");
    }
    slot.emplace(std::move(params));
  }
  const auto ds = open_dataset(config, inputs, true);
  auto set = eval::run_experiments(ds, assi ? &*assi : nullptr, corr ? &*corr : nullptr,
                                   config.eval.max_lead, config.eval.split);
  eval::write_reports(set, config.dataset.grid, out, config.eval.block);
  const auto summary = eval::summarize(set, config.dataset.grid, config.eval.bootstrap,
                                       config.eval.level, config.eval.seed);
  std::ofstream(out / "summary.json") << eval::to_json(summary).dump(2) << '\n';
  write_manifest(out, "evaluate", config,
                 {{"dataset", dataset_input(config, inputs)},
                  {"checkpoints", checkpoint_inputs(inputs.checkpoints)}},
                 {{"split", data::split_name(config.eval.split)},
                  {"samples", set.sample_ids.size()},
                  {"rerun", rerun_line("evaluate", out, input_flags(config, inputs))}});
  return set;
}

std::vector<perturb::PerturbSpec> read_specs(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read perturbation spec '" + path.string() + "'");
  std::vector<perturb::PerturbSpec> specs;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty() || line[0] == '#' || line.rfind("id,", 0) == 0) continue;
    std::vector<std::string> f;
    std::istringstream row(line);
    std::string item;
    while (std::getline(row, item, ',')) f.push_back(item);
    if (f.size() != 7) {
      throw std::runtime_error(path.string() + ":" + std::to_string(number) +
                               ": expected id,row,col,channel,magnitude,window,sky");
    }
    try {
      specs.push_back(perturb::PerturbSpec{f[0], std::stoul(f[1]), std::stoul(f[2]),
                                           std::stoi(f[3]), std::stod(f[4]),
                                           perturb::parse_window(f[5]), perturb::parse_sky(f[6])});
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return specs;
}

perturb::BatteryReport cmd_perturb(const RunConfig& config, const Inputs& inputs,
                                   const fs::path& out) {
  config.validate();
  if (inputs.checkpoints.size() > 1) throw std::invalid_argument("perturb: one checkpoint at most");
  const auto ds = open_dataset(config, inputs, true);
  const auto& sample = pick_sample(ds, config, inputs);
  const auto& grid = config.dataset.grid;
  std::optional<net::NetParams> params;
  if (!inputs.checkpoints.empty()) params.emplace(load_network(config, inputs.checkpoints.front()));
  if (params && params->kind() != net::NetKind::assimilator) {
    throw std::invalid_argument("perturb: the checkpoint is a corrector, not an assimilator");
  }
  const auto setup = oracle_setup(config, ds);
  perturb::BatteryReport report;
  const perturb::IncrementFn fn = [&](const perturb::PerturbSpec& spec) {
    return params ? perturb::perturbed_increment(*params, sample.background, sample.obs, spec)
                  : perturb::oracle_increment(setup, sample.obs, spec);
  };
  if (!inputs.spec.empty()) {
    report = perturb::run_cases(fn, read_specs(inputs.spec), grid, sample.obs.crop);
  } else {
    report = perturb::consistency_battery(fn, sample.obs, grid, config.dataset.obs.channels,
                                          config.perturb.battery);
  }
  perturb::write_battery(report, grid, sample.obs.crop, out);
  nlohmann::json in{{"dataset", dataset_input(config, inputs)},
                    {"checkpoints", checkpoint_inputs(inputs.checkpoints)}};
  if (!inputs.spec.empty()) in["spec"] = inputs.spec.string();
  write_manifest(out, "perturb", config, in,
                 {{"mode", params ? "network" : "oracle"},
                  {"sample", sample.id},
                  {"rerun", rerun_line("perturb", out, input_flags(config, inputs))}});
  return report;
}

void cmd_oracle(const RunConfig& config, const Inputs& inputs, const fs::path& out) {
  config.validate();
  if (inputs.checkpoints.size() > 1) throw std::invalid_argument("oracle: one checkpoint at most");
  const auto ds = open_dataset(config, inputs, true);
  const auto& sample = pick_sample(ds, config, inputs);
  const auto& grid = config.dataset.grid;
  const auto setup = oracle_setup(config, ds);
  var::LocalAnalysisOptions options{config.oracle.tile, config.oracle.halo,
                                    config.oracle.skip_cloudy};
  const auto analysis = var::local_analysis(sample.background, sample.obs, grid, setup.channels,
                                            setup.b, setup.r, options);
  std::optional<atm::GridState> network;
  if (!inputs.checkpoints.empty()) {
    const auto params = load_network(config, inputs.checkpoints.front());
    network = net::analyze(params, sample.background, &sample.obs);
  }
  fs::create_directories(out);
  io::write_grid(out / "oracle_analysis.fxg", analysis.fields());
  const auto& truth = ds.truth_at(sample).fields();
  const auto& crop = sample.obs.crop;
  const eval::Box box{crop.row0, crop.col0, crop.height, crop.width};
  const auto lats = grid.latitudes();
  std::ofstream csv(out / "comparison.csv");
  csv << "channel,rmse_background,rmse_oracle,rmse_network\n";
  for (std::size_t c = 0; c < grid.channels(); ++c) {
    csv << eval::channel_name(grid, c) << ','
        << fmt(eval::regional_rmse(sample.background.fields(), truth, box, lats, c)) << ','
        << fmt(eval::regional_rmse(analysis.fields(), truth, box, lats, c)) << ','
        << (network ? fmt(eval::regional_rmse(network->fields(), truth, box, lats, c)) : "nan")
        << '\n';
  }
  write_manifest(out, "oracle", config,
                 {{"dataset", dataset_input(config, inputs)},
                  {"checkpoints", checkpoint_inputs(inputs.checkpoints)}},
                 {{"sample", sample.id}, {"rerun", rerun_line("oracle", out, input_flags(config, inputs))}});
}

}  // namespace fxda::cli
