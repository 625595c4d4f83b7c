// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "fxda/atm/model.hpp"
#include "fxda/data/dataset.hpp"
#include "fxda/net/danet.hpp"
#include "fxda/obs/superobs.hpp"
#include "fxda/var/oracle.hpp"

namespace fxda::perturb {

enum class WindowPos { beginning, middle, end };
enum class Sky { clear, cloudy };

const char* window_name(WindowPos w);
WindowPos parse_window(const std::string& name);
const char* sky_name(Sky s);
Sky parse_sky(const std::string& name);

/// Frame index of a window position.
std::size_t frame_of(WindowPos w, std::size_t frames);

/// Single-observation perturbation. `row` and `col` are model-grid indices.
struct PerturbSpec {
  std::string id;
  std::size_t row = 0;
  std::size_t col = 0;
  int channel_id = 9;
  double magnitude = 1.0;
  WindowPos window = WindowPos::middle;
  Sky sky = Sky::clear;

  /// Throws std::invalid_argument when the magnitude is not finite, the
  /// channel is absent, the cell lies outside the crop or is masked in the
  /// chosen frame.
  void validate(const obs::SuperObsGrid& obs) const;
};

/// Copy of `obs` with the magnitude added to the target value.
obs::SuperObsGrid apply_perturbation(const obs::SuperObsGrid& obs, const PerturbSpec& spec);

/// forward(background, obs + delta) - forward(background, obs).
atm::GridState perturbed_increment(const net::NetParams& params, const atm::GridState& background,
                                   const obs::SuperObsGrid& obs, const PerturbSpec& spec);

struct OracleSetup {
  atm::GridSpec grid;
  std::vector<obs::ChannelSpec> channels;
  var::CovarianceB b;
  var::CovarianceR r;
};

/// B from the empirical background error of the training split with the
/// correlation shape of the background noise; R from the footprint noise.
OracleSetup make_oracle_setup(const data::Dataset& dataset);

/// Single-observation oracle increment K * dy over the crop. A cloudy target
/// is rejected by the oracle and yields a zero increment.
atm::GridState oracle_increment(const OracleSetup& setup, const obs::SuperObsGrid& obs,
                                const PerturbSpec& spec);

/// Latitude-weighted L2 norm of all channels over the crop.
double increment_norm(const atm::GridState& increment, const atm::GridSpec& grid,
                      const obs::Crop& crop);

enum class Status { pass, fail, report, degenerate };
const char* status_name(Status s);

struct CheckRow {
  std::string case_id;
  std::string check_id;
  double value = 0.0;
  Status status = Status::report;
};

struct BatteryConfig {
  std::vector<int> channel_ids{9, 11};
  double magnitude = 1.0;
  double scale = 5.0;
  double cloudy_ratio = 0.1;
  double linearity_tolerance = 0.3;
  double antisymmetry_tolerance = 0.5;
  std::size_t ring_radius = 6;
  /// Minimum distance of a target from the crop edge.
  std::size_t edge = 6;
};

struct BatteryCase {
  PerturbSpec spec;
  atm::GridState increment;
};

struct BatteryReport {
  std::vector<BatteryCase> cases;
  std::vector<CheckRow> rows;

  const CheckRow* find(const std::string& case_id, const std::string& check_id) const;
  bool degenerate() const;
};

using IncrementFn = std::function<atm::GridState(const PerturbSpec&)>;

struct Targets {
  std::size_t clear_row = 0, clear_col = 0;
  std::size_t cloudy_row = 0, cloudy_col = 0;
  bool has_cloudy = false;
};

/// Targets valid in every frame, nearest the crop centre and at least
/// `edge` cells from its border: a cell clear in every frame and a cell
/// fully cloudy in the middle frame.
Targets pick_targets(const obs::SuperObsGrid& obs, std::size_t edge);

/// Runs the protocol: (a) sign, (b) antisymmetry, (c) vertical placement,
/// (d) locality, (e) cloud, linearity and (f) window sweep.
BatteryReport consistency_battery(const IncrementFn& increment, const obs::SuperObsGrid& obs,
                                  const atm::GridSpec& grid,
                                  const std::vector<obs::ChannelSpec>& channels,
                                  const BatteryConfig& config = {});

BatteryReport network_battery(const net::NetParams& params, const atm::GridState& background,
                              const obs::SuperObsGrid& obs, const atm::GridSpec& grid,
                              const std::vector<obs::ChannelSpec>& channels,
                              const BatteryConfig& config = {});

BatteryReport oracle_battery(const OracleSetup& setup, const obs::SuperObsGrid& obs,
                             const BatteryConfig& config = {});

/// Evaluates explicit cases and reports their increment norms only.
BatteryReport run_cases(const IncrementFn& increment, const std::vector<PerturbSpec>& specs,
                        const atm::GridSpec& grid, const obs::Crop& crop);

/// report.csv (case_id,check_id,value,pass), profile.csv with the target
/// column increments and one PGM per case of the humidity increment at the
/// level of largest response.
void write_battery(const BatteryReport& report, const atm::GridSpec& grid, const obs::Crop& crop,
                   const std::filesystem::path& dir);

}  // namespace fxda::perturb
