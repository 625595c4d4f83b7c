// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#include "fxda/perturb/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "fxda/eval/experiments.hpp"
#include "fxda/eval/metrics.hpp"
#include "fxda/parallel.hpp"
#include "fxda/train/trainer.hpp"

namespace fxda::perturb {
namespace fs = std::filesystem;

const char* window_name(WindowPos w) {
  switch (w) {
    case WindowPos::beginning: return "beginning";
    case WindowPos::middle: return "middle";
    case WindowPos::end: return "end";
  }
  return "?";
}

WindowPos parse_window(const std::string& name) {
  if (name == "beginning") return WindowPos::beginning;
  if (name == "middle") return WindowPos::middle;
  if (name == "end") return WindowPos::end;
  throw std::invalid_argument("unknown window position '" + name +
                              "' (expected beginning, middle or end)");
}

const char* sky_name(Sky s) { return s == Sky::clear ? "clear" : "cloudy"; }

Sky parse_sky(const std::string& name) {
  if (name == "clear") return Sky::clear;
  if (name == "cloudy") return Sky::cloudy;
  throw std::invalid_argument("unknown sky '" + name + "' (expected clear or cloudy)");
}

std::size_t frame_of(WindowPos w, std::size_t frames) {
  if (frames == 0) throw std::invalid_argument("frame_of: no frames");
  switch (w) {
    case WindowPos::beginning: return 0;
    case WindowPos::middle: return frames / 2;
    case WindowPos::end: return frames - 1;
  }
  return 0;
}

namespace {

std::size_t channel_index(const obs::SuperObsGrid& obs, int id) {
  const auto it = std::find(obs.channel_ids.begin(), obs.channel_ids.end(), id);
  if (it == obs.channel_ids.end()) {
    throw std::invalid_argument("perturbation: channel " + std::to_string(id) +
                                " is not observed");
  }
  return static_cast<std::size_t>(it - obs.channel_ids.begin());
}

const obs::ChannelSpec& channel_spec(const std::vector<obs::ChannelSpec>& channels, int id) {
  for (const auto& c : channels) {
    if (c.id == id) return c;
  }
  throw std::invalid_argument("perturbation: channel " + std::to_string(id) + " is not defined");
}

}  // namespace

void PerturbSpec::validate(const obs::SuperObsGrid& obs) const {
  if (!std::isfinite(magnitude)) {
    throw std::invalid_argument("perturbation '" + id + "': magnitude must be finite");
  }
  channel_index(obs, channel_id);
  if (!obs.crop.contains(row, col)) {
    throw std::invalid_argument("perturbation '" + id + "': cell (" + std::to_string(row) + ", " +
                                std::to_string(col) + ") lies outside the observed crop");
  }
  const std::size_t f = frame_of(window, obs.frames);
  if (!obs.valid(f, row - obs.crop.row0, col - obs.crop.col0)) {
    throw std::invalid_argument("perturbation '" + id + "': target cell (" + std::to_string(row) +
                                ", " + std::to_string(col) + ") is masked in frame " +
                                std::to_string(f));
  }
}

obs::SuperObsGrid apply_perturbation(const obs::SuperObsGrid& obs, const PerturbSpec& spec) {
  spec.validate(obs);
  obs::SuperObsGrid out = obs;
  const std::size_t f = frame_of(spec.window, obs.frames);
  const std::size_t k = channel_index(obs, spec.channel_id);
  out.bt.at(f * obs.channels() + k, spec.row - obs.crop.row0, spec.col - obs.crop.col0) +=
      spec.magnitude;
  return out;
}

atm::GridState perturbed_increment(const net::NetParams& params, const atm::GridState& background,
                                   const obs::SuperObsGrid& obs, const PerturbSpec& spec) {
  const auto perturbed = apply_perturbation(obs, spec);
  const auto base = net::analyze(params, background, &obs);
  atm::GridState inc = net::analyze(params, background, &perturbed);
  auto& f = inc.fields();
  for (std::size_t i = 0; i < f.numel(); ++i) f[i] -= base.fields()[i];
  return inc;
}

OracleSetup make_oracle_setup(const data::Dataset& dataset) {
  const auto& cfg = dataset.config;
  OracleSetup s;
  s.grid = cfg.grid;
  s.channels = cfg.obs.channels;
  const auto noise = cfg.background_noise();
  const auto std = train::background_error_std(dataset);
  s.b.levels = cfg.grid.level_count();
  s.b.length_scale = noise.length_scale;
  s.b.vertical_rho = noise.vertical_rho;
  s.b.nugget = noise.nugget;
  for (double v : std) s.b.variance.push_back(v * v);
  s.r.variance.assign(s.channels.size(), cfg.obs.noise_std * cfg.obs.noise_std);
  return s;
}

atm::GridState oracle_increment(const OracleSetup& setup, const obs::SuperObsGrid& obs,
                                const PerturbSpec& spec) {
  spec.validate(obs);
  atm::GridState inc(setup.grid);
  const std::size_t f = frame_of(spec.window, obs.frames);
  const std::size_t ci = spec.row - obs.crop.row0, cj = spec.col - obs.crop.col0;
  if (obs.cloud_fraction.at(f, ci, cj) > 0.0) return inc;

  const auto& channel = channel_spec(setup.channels, spec.channel_id);
  const std::size_t k = channel_index(obs, spec.channel_id);
  var::LinearObsOperator h;
  h.window = var::StateWindow{obs.crop.row0, obs.crop.col0, obs.crop.height, obs.crop.width,
                              setup.grid.channels()};
  const auto wf = obs::weighting_function(channel, setup.grid.levels);
  const double zenith = obs::zenith_at(setup.grid.latitude(spec.row),
                                       setup.grid.longitude(spec.col), obs.crop, setup.grid);
  const auto jac = obs::jacobian_bt(channel, wf, zenith);
  var::LinearObsOperator::Row row;
  row.cell = ci * obs.crop.width + cj;
  row.obs_channel = k;
  row.weights.assign(setup.grid.channels(), 0.0);
  for (std::size_t l = 0; l < setup.grid.level_count(); ++l) {
    row.weights[setup.grid.t_channel(l)] = jac.d_temperature[l];
    row.weights[setup.grid.q_channel(l)] = jac.d_humidity[l];
  }
  h.rows.push_back(std::move(row));
  var::VectorXd r_diag(1);
  r_diag[0] = setup.r.variance.at(k);
  const auto gain = var::kalman_gain(h, setup.b, r_diag);
  var::VectorXd dy(1);
  dy[0] = spec.magnitude;
  h.window.scatter_add(var::single_obs_increment(gain, dy), inc);
  return inc;
}

double increment_norm(const atm::GridState& increment, const atm::GridSpec& grid,
                      const obs::Crop& crop) {
  const auto w = grid.latitude_weights();
  double acc = 0.0;
  for (std::size_t c = 0; c < increment.channels(); ++c) {
    for (std::size_t i = crop.row0; i < crop.row0 + crop.height; ++i) {
      for (std::size_t j = crop.col0; j < crop.col0 + crop.width; ++j) {
        const double v = increment.at(c, i, j);
        acc += w[i] * v * v;
      }
    }
  }
  return std::sqrt(acc);
}

const char* status_name(Status s) {
  switch (s) {
    case Status::pass: return "pass";
    case Status::fail: return "fail";
    case Status::report: return "report";
    case Status::degenerate: return "degenerate";
  }
  return "?";
}

const CheckRow* BatteryReport::find(const std::string& case_id,
                                    const std::string& check_id) const {
  for (const auto& r : rows) {
    if (r.case_id == case_id && r.check_id == check_id) return &r;
  }
  return nullptr;
}

bool BatteryReport::degenerate() const {
  return std::any_of(rows.begin(), rows.end(),
                     [](const CheckRow& r) { return r.status == Status::degenerate; });
}

Targets pick_targets(const obs::SuperObsGrid& obs, std::size_t edge) {
  const auto& crop = obs.crop;
  if (2 * edge >= crop.height || 2 * edge >= crop.width) {
    throw std::invalid_argument("pick_targets: edge " + std::to_string(edge) +
                                " leaves no interior in the crop");
  }
  const double ci = 0.5 * static_cast<double>(crop.height - 1);
  const double cj = 0.5 * static_cast<double>(crop.width - 1);
  double best_clear = std::numeric_limits<double>::infinity();
  double best_cloudy = best_clear;
  Targets t;
  bool has_clear = false;
  const std::size_t middle = frame_of(WindowPos::middle, obs.frames);
  for (std::size_t i = edge; i + edge < crop.height; ++i) {
    for (std::size_t j = edge; j + edge < crop.width; ++j) {
      bool valid = true, clear = true;
      for (std::size_t f = 0; f < obs.frames; ++f) {
        valid = valid && obs.valid(f, i, j);
        clear = clear && obs.cloud_fraction.at(f, i, j) == 0.0;
      }
      const bool overcast = obs.cloud_fraction.at(middle, i, j) == 1.0;
      if (!valid) continue;
      const double d = std::hypot(static_cast<double>(i) - ci, static_cast<double>(j) - cj);
      if (clear && d < best_clear) {
        best_clear = d;
        t.clear_row = crop.row0 + i;
        t.clear_col = crop.col0 + j;
        has_clear = true;
      }
      if (overcast && d < best_cloudy) {
        best_cloudy = d;
        t.cloudy_row = crop.row0 + i;
        t.cloudy_col = crop.col0 + j;
        t.has_cloudy = true;
      }
    }
  }
  if (!has_clear) throw std::runtime_error("pick_targets: no clear cell valid in every frame");
  return t;
}

namespace {

std::string case_name(int channel, const char* what) {
  return "ch" + std::to_string(channel) + "_" + what;
}

struct Geometry {
  const atm::GridSpec& grid;
  const obs::Crop& crop;
  std::vector<double> weights;
};

double humidity_mean(const atm::GridState& inc, const Geometry& g, std::size_t level) {
  double acc = 0.0, wsum = 0.0;
  const std::size_t c = g.grid.q_channel(level);
  for (std::size_t i = g.crop.row0; i < g.crop.row0 + g.crop.height; ++i) {
    for (std::size_t j = g.crop.col0; j < g.crop.col0 + g.crop.width; ++j) {
      acc += g.weights[i] * inc.at(c, i, j);
      wsum += g.weights[i];
    }
  }
  return acc / wsum;
}

std::size_t humidity_peak_level(const atm::GridState& inc, const Geometry& g) {
  std::size_t best = 0;
  double best_energy = -1.0;
  for (std::size_t l = 0; l < g.grid.level_count(); ++l) {
    double e = 0.0;
    const std::size_t c = g.grid.q_channel(l);
    for (std::size_t i = g.crop.row0; i < g.crop.row0 + g.crop.height; ++i) {
      for (std::size_t j = g.crop.col0; j < g.crop.col0 + g.crop.width; ++j) {
        e += g.weights[i] * inc.at(c, i, j) * inc.at(c, i, j);
      }
    }
    if (e > best_energy) {
      best_energy = e;
      best = l;
    }
  }
  return best;
}

/// Latitude-weighted RMS over all channels of each Chebyshev ring around
/// the target, restricted to the crop.
std::vector<double> ring_rms(const atm::GridState& inc, const Geometry& g, std::size_t row,
                             std::size_t col, std::size_t radius) {
  std::vector<double> acc(radius + 1, 0.0), wsum(radius + 1, 0.0);
  for (std::size_t i = g.crop.row0; i < g.crop.row0 + g.crop.height; ++i) {
    for (std::size_t j = g.crop.col0; j < g.crop.col0 + g.crop.width; ++j) {
      const std::size_t di = i > row ? i - row : row - i;
      const std::size_t dj = j > col ? j - col : col - j;
      const std::size_t d = std::max(di, dj);
      if (d > radius) continue;
      double e = 0.0;
      for (std::size_t c = 0; c < inc.channels(); ++c) e += inc.at(c, i, j) * inc.at(c, i, j);
      acc[d] += g.weights[i] * e;
      wsum[d] += g.weights[i];
    }
  }
  for (std::size_t d = 0; d <= radius; ++d) {
    acc[d] = wsum[d] > 0.0 ? std::sqrt(acc[d] / wsum[d]) : 0.0;
  }
  return acc;
}

Status judge(bool ok) { return ok ? Status::pass : Status::fail; }

}  // namespace

BatteryReport consistency_battery(const IncrementFn& increment, const obs::SuperObsGrid& obs,
                                  const atm::GridSpec& grid,
                                  const std::vector<obs::ChannelSpec>& channels,
                                  const BatteryConfig& config) {
  const Targets targets = pick_targets(obs, config.edge);
  std::vector<PerturbSpec> specs;
  for (int id : config.channel_ids) {
    channel_spec(channels, id);
    const auto clear = [&](const char* what, double magnitude, WindowPos w) {
      specs.push_back(PerturbSpec{case_name(id, what), targets.clear_row, targets.clear_col, id,
                                  magnitude, w, Sky::clear});
    };
    clear("clear_p1", config.magnitude, WindowPos::middle);
    clear("clear_m1", -config.magnitude, WindowPos::middle);
    clear("clear_p5", config.scale * config.magnitude, WindowPos::middle);
    clear("clear_p1_beginning", config.magnitude, WindowPos::beginning);
    clear("clear_p1_end", config.magnitude, WindowPos::end);
    if (targets.has_cloudy) {
      specs.push_back(PerturbSpec{case_name(id, "cloudy_p1"), targets.cloudy_row,
                                  targets.cloudy_col, id, config.magnitude, WindowPos::middle,
                                  Sky::cloudy});
    }
  }
  BatteryReport report;
  report.cases.resize(specs.size());
  parallel_for(specs.size(), [&](std::size_t n) {
    report.cases[n] = BatteryCase{specs[n], increment(specs[n])};
  });

  const Geometry g{grid, obs.crop, grid.latitude_weights()};
  const auto find_case = [&](const std::string& id) -> const BatteryCase* {
    for (const auto& c : report.cases) {
      if (c.spec.id == id) return &c;
    }
    return nullptr;
  };
  const auto norm = [&](const BatteryCase& c) { return increment_norm(c.increment, grid, obs.crop); };

  for (int id : config.channel_ids) {
    const auto& p1 = *find_case(case_name(id, "clear_p1"));
    const auto& m1 = *find_case(case_name(id, "clear_m1"));
    const auto& p5 = *find_case(case_name(id, "clear_p5"));
    const double n1 = norm(p1);
    const bool degenerate = n1 == 0.0;
    const auto add = [&](const BatteryCase& c, const std::string& check, double value,
                         Status status) {
      if (degenerate && status != Status::report) status = Status::degenerate;
      report.rows.push_back(CheckRow{c.spec.id, check, value, status});
    };
    for (const auto& c : report.cases) {
      if (c.spec.channel_id == id) add(c, "norm", norm(c), Status::report);
    }
    const std::size_t wf_peak =
        obs::weighting_function(channel_spec(channels, id), grid.levels).peak_level();

    const double sign = humidity_mean(p1.increment, g, wf_peak);
    add(p1, "a_sign", sign, judge(sign < 0.0));

    atm::GridState sum = p1.increment;
    for (std::size_t i = 0; i < sum.fields().numel(); ++i) {
      sum.fields()[i] += m1.increment.fields()[i];
    }
    const double asym = degenerate ? 0.0 : increment_norm(sum, grid, obs.crop) / n1;
    add(m1, "b_antisymmetry", asym, judge(asym <= config.antisymmetry_tolerance));

    const std::size_t peak = humidity_peak_level(p1.increment, g);
    const std::size_t offset = peak > wf_peak ? peak - wf_peak : wf_peak - peak;
    add(p1, "c_vertical", static_cast<double>(peak), judge(offset <= 1));

    const auto rings = ring_rms(p1.increment, g, p1.spec.row, p1.spec.col, config.ring_radius);
    bool monotone = true;
    for (std::size_t d = 1; d < rings.size(); ++d) monotone = monotone && rings[d] <= rings[d - 1];
    std::vector<double> dist(rings.size());
    for (std::size_t d = 0; d < dist.size(); ++d) dist[d] = static_cast<double>(d);
    const double rho = degenerate ? 0.0 : eval::spearman(dist, rings);
    add(p1, "d_locality", rho, judge(monotone));

    if (const auto* cloudy = find_case(case_name(id, "cloudy_p1"))) {
      const double ratio = degenerate ? 0.0 : norm(*cloudy) / n1;
      add(*cloudy, "e_cloud", ratio, judge(ratio < config.cloudy_ratio));
    } else {
      report.rows.push_back(CheckRow{case_name(id, "cloudy_p1"), "e_cloud",
                                     std::numeric_limits<double>::quiet_NaN(), Status::report});
    }

    const double lin = degenerate ? 0.0 : norm(p5) / (config.scale * n1);
    add(p5, "linearity", lin, judge(std::abs(lin - 1.0) <= config.linearity_tolerance));

    for (const char* w : {"clear_p1_beginning", "clear_p1", "clear_p1_end"}) {
      const auto& c = *find_case(case_name(id, w));
      add(c, std::string("f_window_") + window_name(c.spec.window), norm(c), Status::report);
    }
  }
  return report;
}

BatteryReport network_battery(const net::NetParams& params, const atm::GridState& background,
                              const obs::SuperObsGrid& obs, const atm::GridSpec& grid,
                              const std::vector<obs::ChannelSpec>& channels,
                              const BatteryConfig& config) {
  if (params.kind() != net::NetKind::assimilator) {
    throw std::invalid_argument("perturbation battery needs an assimilator checkpoint");
  }
  const IncrementFn fn = [&](const PerturbSpec& spec) {
    return perturbed_increment(params, background, obs, spec);
  };
  return consistency_battery(fn, obs, grid, channels, config);
}

BatteryReport oracle_battery(const OracleSetup& setup, const obs::SuperObsGrid& obs,
                             const BatteryConfig& config) {
  const IncrementFn fn = [&](const PerturbSpec& spec) {
    return oracle_increment(setup, obs, spec);
  };
  return consistency_battery(fn, obs, setup.grid, setup.channels, config);
}

BatteryReport run_cases(const IncrementFn& increment, const std::vector<PerturbSpec>& specs,
                        const atm::GridSpec& grid, const obs::Crop& crop) {
  BatteryReport report;
  report.cases.resize(specs.size());
  parallel_for(specs.size(), [&](std::size_t n) {
    report.cases[n] = BatteryCase{specs[n], increment(specs[n])};
  });
  for (const auto& c : report.cases) {
    report.rows.push_back(
        CheckRow{c.spec.id, "norm", increment_norm(c.increment, grid, crop), Status::report});
  }
  return report;
}

void write_battery(const BatteryReport& report, const atm::GridSpec& grid, const obs::Crop& crop,
                   const fs::path& dir) {
  fs::create_directories(dir);
  {
    std::ofstream csv(dir / "report.csv");
    csv << "case_id,check_id,value,pass\n";
    for (const auto& r : report.rows) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.9e", r.value);
      csv << r.case_id << ',' << r.check_id << ',' << buf << ',' << status_name(r.status) << '\n';
    }
  }
  std::ofstream profile(dir / "profile.csv");
  profile << "case_id,level,pressure,d_temperature,d_humidity\n";
  const Geometry g{grid, crop, grid.latitude_weights()};
  for (const auto& c : report.cases) {
    for (std::size_t l = 0; l < grid.level_count(); ++l) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "%zu,%.1f,%.9e,%.9e", l, grid.levels[l],
                    c.increment.at(grid.t_channel(l), c.spec.row, c.spec.col),
                    c.increment.at(grid.q_channel(l), c.spec.row, c.spec.col));
      profile << c.spec.id << ',' << buf << '\n';
    }
    const std::size_t level = humidity_peak_level(c.increment, g);
    diff::Tensor plane(diff::Shape{1, crop.height, crop.width});
    double peak = 0.0;
    for (std::size_t i = 0; i < crop.height; ++i) {
      for (std::size_t j = 0; j < crop.width; ++j) {
        const double v = c.increment.at(grid.q_channel(level), crop.row0 + i, crop.col0 + j);
        plane.at(0, i, j) = v;
        peak = std::max(peak, std::abs(v));
      }
    }
    eval::write_pgm(dir / (c.spec.id + ".pgm"), plane, -peak, peak);
  }
}

}  // namespace fxda::perturb
