// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#include "fxda/eval/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

#include "fxda/atm/model.hpp"
#include "fxda/parallel.hpp"

namespace fxda::eval {
namespace fs = std::filesystem;

const char* exp_label(Exp e) {
  switch (e) {
    case Exp::ctrl: return "EXP_CTRL";
    case Exp::corr: return "EXP_CORR";
    case Exp::assi: return "EXP_ASSI";
  }
  return "?";
}

double ExperimentSet::mean_rmse(Exp e, std::size_t lead, std::size_t channel,
                                bool crop_only) const {
  const auto v = per_sample(e, lead, channel, crop_only);
  double acc = 0.0;
  for (double x : v) acc += x;
  return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

std::vector<double> ExperimentSet::per_sample(Exp e, std::size_t lead, std::size_t channel,
                                              bool crop_only) const {
  const auto& r = run(e);
  const auto& table = crop_only ? r.crop_rmse : r.rmse;
  std::vector<double> out;
  out.reserve(table.size());
  for (const auto& s : table) out.push_back(s.at(lead).at(channel));
  return out;
}

void check_split_leakage(const std::vector<const data::Sample*>& samples, std::size_t max_lead,
                         std::size_t train_begin, std::size_t train_end) {
  std::set<std::size_t> ids;
  for (const auto* s : samples) {
    if (!ids.insert(s->id).second) {
      throw std::invalid_argument("split leakage: sample " + std::to_string(s->id) +
                                  " appears twice");
    }
    const std::size_t first = s->time_index - 1;  // background start
    const std::size_t last = s->time_index + max_lead;
    if (first < train_end && last >= train_begin) {
      throw std::invalid_argument("split leakage: sample " + std::to_string(s->id) +
                                  " (times " + std::to_string(first) + ".." +
                                  std::to_string(last) + ") overlaps the training range [" +
                                  std::to_string(train_begin) + ", " +
                                  std::to_string(train_end) + ")");
    }
  }
}

ExperimentSet run_experiments(const data::Dataset& ds, const net::NetParams* assimilator,
                              const net::NetParams* corrector, std::size_t max_lead,
                              data::Split split) {
  if (max_lead > ds.config.max_lead) {
    throw std::invalid_argument("evaluate: lead " + std::to_string(max_lead) +
                                " exceeds the stored trajectory lead " +
                                std::to_string(ds.config.max_lead));
  }
  if (assimilator && assimilator->kind() != net::NetKind::assimilator) {
    throw std::invalid_argument("evaluate: EXP_ASSI needs an assimilator checkpoint");
  }
  if (corrector && corrector->kind() != net::NetKind::corrector) {
    throw std::invalid_argument("evaluate: EXP_CORR needs a corrector checkpoint");
  }
  const auto samples = ds.split(split);
  if (split != data::Split::train) {
    const std::size_t begin = ds.config.split_begin(data::Split::train);
    check_split_leakage(samples, max_lead, begin, begin + ds.config.n_train);
  }
  const atm::GridSpec& grid = ds.config.grid;
  const atm::Model forecast(grid, ds.config.forecast);
  const auto weights = grid.latitude_weights();
  const auto lats = grid.latitudes();
  const std::size_t channels = grid.channels();
  const auto& crop = ds.config.obs.crop;

  ExperimentSet set;
  set.max_lead = max_lead;
  set.crop = Box{crop.row0, crop.col0, crop.height, crop.width};
  for (const auto* s : samples) set.sample_ids.push_back(s->id);

  for (Exp e : kAllExps) {
    auto& run = set.runs[static_cast<std::size_t>(e)];
    run.label = e;
    run.squared_error.assign(max_lead + 1, diff::Tensor(grid.state_shape()));
  }

  // Samples are evaluated in chunks and reduced in sample order.
  struct PerSample {
    std::array<std::vector<std::vector<double>>, 3> rmse, crop;
    std::array<std::vector<diff::Tensor>, 3> se;
  };
  constexpr std::size_t kChunk = 8;
  for (std::size_t first = 0; first < samples.size(); first += kChunk) {
    const std::size_t count = std::min(kChunk, samples.size() - first);
    std::vector<PerSample> results(count);
    parallel_for(count, [&](std::size_t n) {
      const auto& s = *samples[first + n];
      PerSample& out = results[n];
      for (Exp e : kAllExps) {
        atm::GridState analysis = s.background;
        if (e == Exp::corr && corrector) analysis = net::analyze(*corrector, s.background, nullptr);
        if (e == Exp::assi && assimilator) analysis = net::analyze(*assimilator, s.background, &s.obs);
        const auto k = static_cast<std::size_t>(e);
        atm::GridState state = analysis;
        for (std::size_t lead = 0; lead <= max_lead; ++lead) {
          if (lead > 0) state = forecast.step(state);
          const auto& truth = ds.truth_at(s, lead).fields();
          std::vector<double> r(channels), c(channels);
          diff::Tensor se(truth.shape());
          for (std::size_t ch = 0; ch < channels; ++ch) {
            r[ch] = rmse(state.fields(), truth, weights, ch);
            c[ch] = regional_rmse(state.fields(), truth, set.crop, lats, ch);
          }
          for (std::size_t i = 0; i < se.numel(); ++i) {
            const double d = state.fields()[i] - truth[i];
            se[i] = d * d;
          }
          out.rmse[k].push_back(std::move(r));
          out.crop[k].push_back(std::move(c));
          out.se[k].push_back(std::move(se));
        }
      }
    });
    for (auto& r : results) {
      for (Exp e : kAllExps) {
        const auto k = static_cast<std::size_t>(e);
        auto& run = set.runs[k];
        run.rmse.push_back(std::move(r.rmse[k]));
        run.crop_rmse.push_back(std::move(r.crop[k]));
        for (std::size_t lead = 0; lead <= max_lead; ++lead) {
          auto& acc = run.squared_error[lead];
          const auto& se = r.se[k][lead];
          for (std::size_t i = 0; i < acc.numel(); ++i) acc[i] += se[i];
        }
      }
    }
  }
  return set;
}

double crop_share(const ExperimentSet& set, Exp better, Exp reference, std::size_t lead,
                  const std::vector<std::size_t>& channels, const atm::GridSpec& grid) {
  const auto& a = set.run(better).squared_error.at(lead);
  const auto& b = set.run(reference).squared_error.at(lead);
  const auto w = grid.latitude_weights();
  double inside = 0.0, total = 0.0;
  for (std::size_t c : channels) {
    for (std::size_t i = 0; i < grid.height; ++i) {
      for (std::size_t j = 0; j < grid.width; ++j) {
        const double red = w[i] * (b.at(c, i, j) - a.at(c, i, j));
        total += red;
        if (i >= set.crop.row0 && i < set.crop.row0 + set.crop.height && j >= set.crop.col0 &&
            j < set.crop.col0 + set.crop.width) {
          inside += red;
        }
      }
    }
  }
  if (total == 0.0) return 0.0;
  return inside / total;
}

Summary summarize(const ExperimentSet& set, const atm::GridSpec& grid, std::size_t resamples,
                  double level, std::uint64_t seed) {
  const std::size_t levels = grid.level_count();
  const auto q_mean = [&](Exp e, std::size_t lead, bool crop) {
    double acc = 0.0;
    for (std::size_t l = 0; l < levels; ++l) acc += set.mean_rmse(e, lead, grid.q_channel(l), crop);
    return acc / static_cast<double>(levels);
  };
  Summary out;
  for (Exp e : kAllExps) out.crop_q_rmse[static_cast<std::size_t>(e)] = q_mean(e, 0, true);
  out.crop_assi_vs_corr = normalized_diff(out.crop_q_rmse[static_cast<std::size_t>(Exp::assi)],
                                          out.crop_q_rmse[static_cast<std::size_t>(Exp::corr)]);
  std::vector<double> diffs(set.sample_ids.size(), 0.0);
  for (std::size_t l = 0; l < levels; ++l) {
    const auto a = set.per_sample(Exp::assi, 0, grid.q_channel(l), true);
    const auto c = set.per_sample(Exp::corr, 0, grid.q_channel(l), true);
    for (std::size_t n = 0; n < diffs.size(); ++n) {
      diffs[n] += (a[n] - c[n]) / static_cast<double>(levels);
    }
  }
  out.crop_diff = bootstrap_mean(diffs, resamples, level, seed);
  std::vector<std::size_t> q_channels;
  for (std::size_t l = 0; l < levels; ++l) q_channels.push_back(grid.q_channel(l));
  std::vector<double> lead, magnitude;
  for (std::size_t t = 0; t <= set.max_lead; ++t) {
    out.lead_diff.push_back(normalized_diff(q_mean(Exp::assi, t, false), q_mean(Exp::corr, t, false)));
    out.crop_share.push_back(crop_share(set, Exp::assi, Exp::corr, t, q_channels, grid));
    if (t >= 1) {
      lead.push_back(static_cast<double>(t));
      magnitude.push_back(std::abs(out.lead_diff.back()));
    }
  }
  out.lead_spearman = lead.size() >= 2 ? spearman(lead, magnitude) : 0.0;
  return out;
}

nlohmann::json to_json(const Summary& s) {
  return nlohmann::json{
      {"crop_q_rmse",
       {{"EXP_CTRL", s.crop_q_rmse[0]}, {"EXP_CORR", s.crop_q_rmse[1]}, {"EXP_ASSI", s.crop_q_rmse[2]}}},
      {"crop_assi_vs_corr", s.crop_assi_vs_corr},
      {"crop_diff", {{"mean", s.crop_diff.mean}, {"lo", s.crop_diff.lo}, {"hi", s.crop_diff.hi}}},
      {"lead_diff", s.lead_diff},
      {"lead_spearman", s.lead_spearman},
      {"crop_share", s.crop_share}};
}

void write_pgm(const fs::path& path, const diff::Tensor& plane, double lo, double hi) {
  if (plane.rank() != 3 || plane.extent(0) != 1) {
    throw diff::ShapeError("write_pgm: expected [1,H,W], got " + diff::to_string(plane.shape()));
  }
  const std::size_t h = plane.extent(1), w = plane.extent(2);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << "P5\n" << w << ' ' << h << "\n255\n";
  const double span = hi > lo ? hi - lo : 1.0;
  // Row 0 is the southernmost latitude; images are written north-up.
  for (std::size_t i = h; i-- > 0;) {
    for (std::size_t j = 0; j < w; ++j) {
      const double t = std::clamp((plane.at(0, i, j) - lo) / span, 0.0, 1.0);
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * t))));
    }
  }
}

void write_reports(const ExperimentSet& set, const atm::GridSpec& grid, const fs::path& dir,
                   std::size_t block) {
  fs::create_directories(dir);
  const std::size_t channels = grid.channels();
  {
    std::ofstream csv(dir / "rmse.csv");
    csv << "experiment,channel,lead,rmse,crop_rmse\n";
    for (Exp e : kAllExps) {
      for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t lead = 0; lead <= set.max_lead; ++lead) {
          char buf[160];
          std::snprintf(buf, sizeof buf, "%s,%s,%zu,%.9e,%.9e", exp_label(e),
                        channel_name(grid, c).c_str(), lead, set.mean_rmse(e, lead, c, false),
                        set.mean_rmse(e, lead, c, true));
          csv << buf << '\n';
        }
      }
    }
  }
  {
    std::ofstream csv(dir / "normalized_diff.csv");
    csv << "channel,lead,assi_vs_corr,assi_vs_ctrl,corr_vs_ctrl,crop_assi_vs_corr,"
           "assi_vs_corr_ma4\n";
    for (std::size_t c = 0; c < channels; ++c) {
      std::vector<double> series;
      for (std::size_t lead = 0; lead <= set.max_lead; ++lead) {
        series.push_back(normalized_diff(set.mean_rmse(Exp::assi, lead, c, false),
                                         set.mean_rmse(Exp::corr, lead, c, false)));
      }
      const auto ma = moving_average(series, 4);
      for (std::size_t lead = 0; lead <= set.max_lead; ++lead) {
        const auto nd = [&](Exp a, Exp b, bool crop) {
          return normalized_diff(set.mean_rmse(a, lead, c, crop), set.mean_rmse(b, lead, c, crop));
        };
        char buf[256];
        std::snprintf(buf, sizeof buf, "%s,%zu,%.9e,%.9e,%.9e,%.9e,%.9e",
                      channel_name(grid, c).c_str(), lead, series[lead],
                      nd(Exp::assi, Exp::ctrl, false), nd(Exp::corr, Exp::ctrl, false),
                      nd(Exp::assi, Exp::corr, true), ma[lead]);
        csv << buf << '\n';
      }
    }
  }
  {
    std::ofstream csv(dir / "regional.csv");
    csv << "channel,crop_ctrl,crop_corr,crop_assi,assi_vs_corr,assi_vs_ctrl\n";
    for (std::size_t c = 0; c < channels; ++c) {
      const double a = set.mean_rmse(Exp::assi, 0, c, true);
      const double r = set.mean_rmse(Exp::corr, 0, c, true);
      const double t = set.mean_rmse(Exp::ctrl, 0, c, true);
      char buf[200];
      std::snprintf(buf, sizeof buf, "%s,%.9e,%.9e,%.9e,%.9e,%.9e", channel_name(grid, c).c_str(),
                    t, r, a, normalized_diff(a, r), normalized_diff(a, t));
      csv << buf << '\n';
    }
  }
  // Maps of the per-block RMSE reduction (EXP_CORR minus EXP_ASSI).
  const std::size_t n = std::max<std::size_t>(set.sample_ids.size(), 1);
  for (std::size_t lead = 0; lead <= set.max_lead; ++lead) {
    for (std::size_t c = grid.level_count(); c < channels; ++c) {
      diff::Tensor zero(grid.state_shape());
      diff::Tensor ra(grid.state_shape()), rc(grid.state_shape());
      for (std::size_t i = 0; i < ra.numel(); ++i) {
        ra[i] = std::sqrt(set.run(Exp::assi).squared_error[lead][i] / static_cast<double>(n));
        rc[i] = std::sqrt(set.run(Exp::corr).squared_error[lead][i] / static_cast<double>(n));
      }
      const auto lats = grid.latitudes();
      const auto ma = rmse_map(ra, zero, c, block, block, lats);
      const auto mc = rmse_map(rc, zero, c, block, block, lats);
      diff::Tensor red(ma.shape());
      double peak = 0.0;
      for (std::size_t i = 0; i < red.numel(); ++i) {
        red[i] = mc[i] - ma[i];
        peak = std::max(peak, std::abs(red[i]));
      }
      char name[64];
      std::snprintf(name, sizeof name, "improvement_%s_lead%zu.pgm", channel_name(grid, c).c_str(),
                    lead);
      write_pgm(dir / name, red, -peak, peak);
    }
  }
}

}  // namespace fxda::eval
