// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fxda/cli/commands.hpp"

namespace {

struct Args {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string mode;
  std::vector<std::string> checkpoints;
  std::string dataset;
  std::string resume;
  std::string spec;
  std::optional<std::size_t> sample;
};

fxda::cli::Inputs inputs_of(const Args& a) {
  fxda::cli::Inputs in;
  in.dataset = a.dataset;
  for (const auto& c : a.checkpoints) in.checkpoints.emplace_back(c);
  in.resume = a.resume;
  in.spec = a.spec;
  in.sample = a.sample;
  return in;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data assimilation with a learned analysis network on a toy atmosphere"};
  app.require_subcommand(1);
  Args args;

  const auto common = [&](CLI::App* cmd) {
    cmd->add_option("--config", args.config, "INI run configuration (defaults when omitted)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", args.out, "Output directory")->required();
    cmd->add_option("--seed", args.seed, "Override the seed of this command");
  };
  const auto dataset = [&](CLI::App* cmd) {
    cmd->add_option("--dataset", args.dataset, "Dataset directory (default: dataset.dir)");
  };

  auto* generate = app.add_subcommand("generate", "Generate truth, backgrounds and observations");
  common(generate);

  auto* train = app.add_subcommand("train", "Train an assimilator or a corrector");
  common(train);
  dataset(train);
  train->add_option("--mode", args.mode, "Network to train")
      ->required()
      ->check(CLI::IsMember({"assi", "corr"}));
  train->add_option("--checkpoint", args.resume, "Checkpoint to resume from")
      ->check(CLI::ExistingFile);

  auto* evaluate = app.add_subcommand("evaluate", "Run EXP_CTRL, EXP_CORR and EXP_ASSI");
  common(evaluate);
  dataset(evaluate);
  evaluate->add_option("--checkpoint", args.checkpoints, "Assimilator and/or corrector checkpoints")
      ->check(CLI::ExistingFile);

  auto* perturb = app.add_subcommand("perturb", "Single-observation perturbation battery");
  common(perturb);
  dataset(perturb);
  perturb->add_option("--checkpoint", args.checkpoints, "Assimilator checkpoint")
      ->check(CLI::ExistingFile);
  perturb->add_option("--mode", args.mode, "network needs --checkpoint; oracle ignores it")
      ->check(CLI::IsMember({"network", "oracle"}));
  perturb->add_option("--spec", args.spec, "CSV of cases: id,row,col,channel,magnitude,window,sky")
      ->check(CLI::ExistingFile);
  perturb->add_option("--sample", args.sample, "Sample id (default: perturb.sample of eval.split)");

  auto* oracle = app.add_subcommand("oracle", "Variational oracle analysis for one sample");
  common(oracle);
  dataset(oracle);
  oracle->add_option("--checkpoint", args.checkpoints, "Network to compare against")
      ->check(CLI::ExistingFile);
  oracle->add_option("--sample", args.sample, "Sample id (default: perturb.sample of eval.split)");

  CLI11_PARSE(app, argc, argv);

  try {
    using namespace fxda::cli;
    RunConfig config = args.config.empty() ? RunConfig{} : load_config(args.config);
    const Inputs in = inputs_of(args);
    if (generate->parsed()) {
      if (args.seed) config.dataset.seed = *args.seed;
      cmd_generate(config, args.out);
    } else if (train->parsed()) {
      if (args.seed) config.train.seed = *args.seed;
      const auto result = cmd_train(config, in, args.out, fxda::net::parse_kind(args.mode));
      if (!result.history.empty()) {
        std::cout << fxda::train::format_record(result.history.back()) << '\n';
      }
    } else if (evaluate->parsed()) {
      if (args.seed) config.eval.seed = *args.seed;
      cmd_evaluate(config, in, args.out);
    } else if (perturb->parsed()) {
      if (args.mode == "network" && in.checkpoints.empty()) {
        throw std::invalid_argument("perturb --mode network needs --checkpoint");
      }
      Inputs p = in;
      if (args.mode == "oracle") p.checkpoints.clear();
      const auto report = cmd_perturb(config, p, args.out);
      for (const auto& r : report.rows) {
        if (r.check_id == "norm") continue;
        std::cout << r.case_id << ' ' << r.check_id << ' ' << r.value << ' '
                  << fxda::perturb::status_name(r.status) << '\n';
      }
    } else if (oracle->parsed()) {
      cmd_oracle(config, in, args.out);
    }
  } catch (const std::exception& e) {
    std::cerr << "fxda: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
