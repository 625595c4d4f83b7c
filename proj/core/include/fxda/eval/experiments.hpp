// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "fxda/data/dataset.hpp"
#include "fxda/eval/metrics.hpp"
#include "fxda/net/danet.hpp"

#include <nlohmann/json.hpp>

namespace fxda::eval {

enum class Exp { ctrl = 0, corr = 1, assi = 2 };
inline constexpr std::array<Exp, 3> kAllExps{Exp::ctrl, Exp::corr, Exp::assi};
const char* exp_label(Exp e);

/// Metrics of one experiment. Lead 0 is the analysis.
struct ExperimentRun {
  Exp label = Exp::ctrl;
  /// [sample][lead][channel]
  std::vector<std::vector<std::vector<double>>> rmse;
  std::vector<std::vector<std::vector<double>>> crop_rmse;
  /// Sum over samples of squared error, one [C,H,W] tensor per lead.
  std::vector<diff::Tensor> squared_error;
};

struct ExperimentSet {
  std::vector<std::size_t> sample_ids;
  std::size_t max_lead = 0;
  Box crop;
  std::array<ExperimentRun, 3> runs;

  const ExperimentRun& run(Exp e) const { return runs[static_cast<std::size_t>(e)]; }
  /// Mean over samples.
  double mean_rmse(Exp e, std::size_t lead, std::size_t channel, bool crop_only) const;
  /// Per-sample values.
  std::vector<double> per_sample(Exp e, std::size_t lead, std::size_t channel,
                                 bool crop_only) const;
};

/// Rejects evaluation samples whose analysis or forecast times fall inside
/// the training range [train_begin, train_end) or that repeat an id.
void check_split_leakage(const std::vector<const data::Sample*>& samples, std::size_t max_lead,
                         std::size_t train_begin, std::size_t train_end);

/// EXP_CTRL uses the raw background, EXP_CORR the corrector and EXP_ASSI the
/// assimilator; each analysis is then forecast `max_lead` steps. A missing
/// network makes its experiment a copy of EXP_CTRL.
ExperimentSet run_experiments(const data::Dataset& dataset, const net::NetParams* assimilator,
                              const net::NetParams* corrector, std::size_t max_lead,
                              data::Split split = data::Split::test);

/// Share of the latitude-weighted squared-error reduction of `better`
/// relative to `reference` that falls inside the crop, summed over the
/// given channels.
double crop_share(const ExperimentSet& set, Exp better, Exp reference, std::size_t lead,
                  const std::vector<std::size_t>& channels, const atm::GridSpec& grid);

/// Headline numbers for the humidity channels. Crop values are means over
/// the Q channels of the per-channel crop RMSE.
struct Summary {
  std::array<double, 3> crop_q_rmse{};  // lead 0, indexed by Exp
  double crop_assi_vs_corr = 0.0;       // normalized difference
  Interval crop_diff;                   // per-sample ASSI minus CORR
  std::vector<double> lead_diff;        // normalized_diff(ASSI, CORR), global Q
  double lead_spearman = 0.0;           // |lead_diff| against lead over 1..max
  std::vector<double> crop_share;       // per lead, Q channels
};

Summary summarize(const ExperimentSet& set, const atm::GridSpec& grid, std::size_t resamples,
                  double level, std::uint64_t seed);
nlohmann::json to_json(const Summary& summary);

/// rmse.csv, normalized_diff.csv, regional.csv and PGM maps of the
/// squared-error reduction at every lead.
void write_reports(const ExperimentSet& set, const atm::GridSpec& grid,
                   const std::filesystem::path& dir, std::size_t block = 4);

/// Portable graymap scaled linearly from [lo, hi].
void write_pgm(const std::filesystem::path& path, const diff::Tensor& plane, double lo, double hi);

}  // namespace fxda::eval
