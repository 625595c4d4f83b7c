// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#include "fxda/train/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fxda/diff/ops.hpp"
#include "fxda/io/binary.hpp"
#include "fxda/rng.hpp"
#include "fxda/train/loss.hpp"

namespace fxda::train {
namespace fs = std::filesystem;
namespace {

constexpr std::uint64_t kOrderStream = 0x5eed;

double as_float(double v) { return static_cast<double>(static_cast<float>(v)); }

void quantize_tensor(diff::Tensor& t) {
  for (double& v : t.values()) v = as_float(v);
}

// Detached copy: gradient stops here.
diff::Var detach(const diff::Var& v) { return diff::Var(v.value()); }

fs::path checkpoint_path(const fs::path& dir, std::size_t step) {
  char name[32];
  std::snprintf(name, sizeof name, "ckpt_%06zu.fxc", step);
  return dir / name;
}

io::Checkpoint make_checkpoint(const net::NetParams& params, AdamW& opt,
                               const std::vector<diff::Parameter*>& trainable,
                               std::size_t step, const TrainConfig& config) {
  io::Checkpoint ck = params.to_checkpoint();
  for (std::size_t k = 0; k < trainable.size(); ++k) {
    ck.tensors.emplace_back("adam.m." + trainable[k]->name(), opt.first_moments()[k]);
    ck.tensors.emplace_back("adam.v." + trainable[k]->name(), opt.second_moments()[k]);
  }
  ck.meta["step"] = step;
  ck.meta["total_iterations"] = config.schedule.total_iterations;
  ck.meta["rollout"] = config.rollout;
  ck.meta["seed"] = config.seed;
  return ck;
}

}  // namespace

void TrainConfig::validate() const {
  schedule.validate();
  if (batch == 0) throw std::invalid_argument("train: batch must be >= 1");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw std::invalid_argument("train: betas must lie in [0, 1)");
  }
  if (!(adam.weight_decay >= 0.0) || !(adam.epsilon > 0.0)) {
    throw std::invalid_argument("train: weight decay must be >= 0 and epsilon > 0");
  }
}

void quantize(net::NetParams& params) {
  for (auto& p : params.parameters()) quantize_tensor(p.value());
}

std::string format_record(const TrainRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g", r.step, r.lr, r.analysis_loss,
                r.rollout_loss, r.total);
  return buf;
}

net::Normalization compute_normalization(const data::Dataset& ds, bool include_obs) {
  const auto train = ds.split(data::Split::train);
  if (train.empty()) throw std::invalid_argument("normalization: empty training split");
  const std::size_t c = ds.config.grid.channels();
  const std::size_t k = ds.config.obs.channels.size();
  std::vector<double> s_sum(c, 0.0), s_sq(c, 0.0), b_sum(k, 0.0), b_sq(k, 0.0);
  std::vector<std::size_t> b_n(k, 0);
  std::size_t s_n = 0;
  const std::size_t plane = ds.config.grid.height * ds.config.grid.width;
  for (const auto* s : train) {
    const auto& f = s->background.fields();
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t q = 0; q < plane; ++q) {
        const double v = f[ch * plane + q];
        s_sum[ch] += v;
        s_sq[ch] += v * v;
      }
    }
    s_n += plane;
    if (!include_obs) continue;
    const auto& o = s->obs;
    for (std::size_t fr = 0; fr < o.frames; ++fr) {
      for (std::size_t i = 0; i < o.crop.height; ++i) {
        for (std::size_t j = 0; j < o.crop.width; ++j) {
          if (!o.valid(fr, i, j)) continue;
          for (std::size_t ch = 0; ch < k; ++ch) {
            const double v = o.value(fr, ch, i, j);
            b_sum[ch] += v;
            b_sq[ch] += v * v;
            ++b_n[ch];
          }
        }
      }
    }
  }
  net::Normalization n;
  const auto finish = [](double sum, double sq, std::size_t count, double& mean, double& sd) {
    if (count == 0) {
      mean = 0.0;
      sd = 1.0;
      return;
    }
    mean = sum / static_cast<double>(count);
    const double var = std::max(sq / static_cast<double>(count) - mean * mean, 0.0);
    sd = var > 1e-12 ? std::sqrt(var) : 1.0;
  };
  n.state_mean.resize(c);
  n.state_std.resize(c);
  for (std::size_t ch = 0; ch < c; ++ch) finish(s_sum[ch], s_sq[ch], s_n, n.state_mean[ch], n.state_std[ch]);
  n.bt_mean.resize(k);
  n.bt_std.resize(k);
  for (std::size_t ch = 0; ch < k; ++ch) finish(b_sum[ch], b_sq[ch], b_n[ch], n.bt_mean[ch], n.bt_std[ch]);
  return n;
}

std::vector<double> background_error_std(const data::Dataset& ds) {
  const auto train = ds.split(data::Split::train);
  const std::size_t c = ds.config.grid.channels();
  const std::size_t plane = ds.config.grid.height * ds.config.grid.width;
  std::vector<double> sq(c, 0.0);
  for (const auto* s : train) {
    const auto& b = s->background.fields();
    const auto& t = ds.truth_at(*s).fields();
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t q = 0; q < plane; ++q) {
        const double d = b[ch * plane + q] - t[ch * plane + q];
        sq[ch] += d * d;
      }
    }
  }
  std::vector<double> out(c, 1.0);
  if (train.empty()) return out;
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double v = sq[ch] / static_cast<double>(train.size() * plane);
    out[ch] = v > 1e-12 ? as_float(std::sqrt(v)) : 1.0;
  }
  return out;
}

std::size_t sample_for_step(std::uint64_t seed, std::size_t step, std::size_t slot,
                            std::size_t batch, std::size_t n_train) {
  if (n_train == 0) throw std::invalid_argument("empty training split");
  const std::size_t draw = (step - 1) * batch + slot;
  const std::size_t epoch = draw / n_train;
  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, kOrderStream, epoch));
  for (std::size_t i = n_train - 1; i > 0; --i) {
    std::swap(order[i], order[static_cast<std::size_t>(rng.below(i + 1))]);
  }
  return order[draw % n_train];
}

SampleLoss sample_loss(const net::NetParams& params, const data::Sample& sample,
                       const data::Dataset& ds, const atm::Model& forecast,
                       std::size_t rollout, std::size_t backprop_steps,
                       const std::vector<double>& channel_scale) {
  const auto weights = ds.config.grid.latitude_weights();
  const obs::SuperObsGrid* so = params.kind() == net::NetKind::assimilator ? &sample.obs : nullptr;
  const diff::Var analysis = net::analysis_var(params, sample.background, so);
  SampleLoss out;
  const diff::Var l0 = weighted_l1(analysis, ds.truth_at(sample).fields(), weights, channel_scale);
  out.analysis = l0.value().item();
  std::vector<diff::Var> leads;
  diff::Var x = analysis;
  double acc = 0.0;
  for (std::size_t t = 1; t <= rollout; ++t) {
    if (backprop_steps != 0 && t == backprop_steps + 1) x = detach(x);
    x = forecast.step(x);
    leads.push_back(weighted_l1(x, ds.truth_at(sample, t).fields(), weights, channel_scale));
    acc += leads.back().value().item();
  }
  out.rollout = rollout == 0 ? 0.0 : acc / static_cast<double>(rollout);
  out.total = total_loss(l0, leads);
  return out;
}

TrainResult train(net::NetParams params, const data::Dataset& ds, const TrainConfig& config,
                  const TrainOptions& options) {
  config.validate();
  const auto train_split = ds.split(data::Split::train);
  if (train_split.empty()) throw std::invalid_argument("train: empty training split");
  if (config.rollout > ds.config.max_lead) {
    throw std::invalid_argument("train: rollout " + std::to_string(config.rollout) +
                                " exceeds the dataset's stored lead " +
                                std::to_string(ds.config.max_lead));
  }
  const atm::Model forecast(ds.config.grid, ds.config.forecast);
  const auto scale = background_error_std(ds);

  std::vector<diff::Parameter*> trainable;
  for (auto& p : params.parameters()) {
    if (p.trainable()) trainable.push_back(&p);
  }
  AdamW opt(trainable, config.adam);

  TrainResult result{params, {}, {}};
  std::size_t first_step = 1;
  if (!options.resume.empty()) {
    const auto ck = io::read_checkpoint(options.resume);
    params.load(ck);
    for (std::size_t k = 0; k < trainable.size(); ++k) {
      const auto* m = ck.find("adam.m." + trainable[k]->name());
      const auto* v = ck.find("adam.v." + trainable[k]->name());
      if (!m || !v) throw std::invalid_argument("resume: checkpoint lacks optimizer state");
      opt.first_moments()[k] = *m;
      opt.second_moments()[k] = *v;
    }
    const auto step = ck.meta.at("step").get<std::size_t>();
    opt.set_steps_taken(step);
    first_step = step + 1;
    result.last_checkpoint = options.resume;
  } else {
    params.set_normalization(
        compute_normalization(ds, params.kind() == net::NetKind::assimilator));
    quantize(params);
  }

  std::ofstream csv;
  if (!options.out_dir.empty()) {
    fs::create_directories(options.out_dir);
    const fs::path csv_path = options.out_dir / "loss.csv";
    std::vector<std::string> kept;
    if (first_step > 1 && fs::exists(csv_path)) {
      std::ifstream in(csv_path);
      std::string line;
      std::getline(in, line);
      while (std::getline(in, line)) {
        if (std::stoull(line.substr(0, line.find(','))) < first_step) kept.push_back(line);
      }
    }
    csv.open(csv_path, std::ios::trunc);
    csv << kLossHeader << '\n';
    for (const auto& l : kept) csv << l << '\n';
  }

  const std::size_t last = options.stop_after != 0
                               ? std::min(options.stop_after, config.schedule.total_iterations)
                               : config.schedule.total_iterations;
  for (std::size_t step = first_step; step <= last; ++step) {
    params.zero_grad();
    TrainRecord rec;
    rec.step = step;
    rec.lr = lr_at_step(step, config.schedule);
    for (std::size_t slot = 0; slot < config.batch; ++slot) {
      const std::size_t idx =
          sample_for_step(config.seed, step, slot, config.batch, train_split.size());
      const auto loss = sample_loss(params, *train_split[idx], ds, forecast, config.rollout,
                                    config.backprop_steps, scale);
      const double tot = loss.total.value().item();
      if (!std::isfinite(tot)) {
        throw TrainingError("non-finite loss at step " + std::to_string(step) +
                                "; last checkpoint: " + result.last_checkpoint.string(),
                            step, result.last_checkpoint);
      }
      diff::backward(config.batch == 1 ? loss.total
                                       : diff::scale(loss.total, 1.0 / static_cast<double>(config.batch)));
      const double inv = 1.0 / static_cast<double>(config.batch);
      rec.analysis_loss += loss.analysis * inv;
      rec.rollout_loss += loss.rollout * inv;
      rec.total += tot * inv;
    }
    opt.step(rec.lr);
    quantize(params);
    for (std::size_t k = 0; k < trainable.size(); ++k) {
      quantize_tensor(opt.first_moments()[k]);
      quantize_tensor(opt.second_moments()[k]);
    }
    result.history.push_back(rec);
    if (csv.is_open()) csv << format_record(rec) << '\n';
    if (options.on_step) options.on_step(rec);
    const bool periodic = config.checkpoint_every != 0 && step % config.checkpoint_every == 0;
    if (!options.out_dir.empty() && (periodic || step == last)) {
      csv.flush();
      result.last_checkpoint = checkpoint_path(options.out_dir, step);
      io::write_checkpoint(result.last_checkpoint, make_checkpoint(params, opt, trainable, step, config));
    }
  }
  result.params = std::move(params);
  return result;
}

}  // namespace fxda::train
