// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#include "fxda/net/danet.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "fxda/diff/ops.hpp"
#include "fxda/rng.hpp"

namespace fxda::net {

using diff::Padding;
using diff::Shape;
using diff::Tensor;
using diff::Var;

namespace {

std::size_t even_height(const atm::GridSpec& grid) { return grid.height - grid.height % 2; }

}  // namespace

void NetConfig::validate(const atm::GridSpec& grid) const {
  grid.validate();
  for (std::size_t w : widths) {
    if (w == 0) throw std::invalid_argument("net: stage widths must be positive");
  }
  if (channels != grid.channels()) {
    throw std::invalid_argument("net: configured for " + std::to_string(channels) +
                                " channels, grid has " + std::to_string(grid.channels()));
  }
  if (frames == 0 || obs_channels == 0) {
    throw std::invalid_argument("net: frames and obs channels must be >= 1");
  }
  const std::size_t h = even_height(grid);
  if (h % 4 != 0 || grid.width % 4 != 0) {
    throw std::invalid_argument("net: grid extents must be multiples of 4 after the parity fix");
  }
  if (crop.height == 0 || crop.width == 0 || crop.row0 + crop.height > h ||
      crop.col0 + crop.width > grid.width) {
    throw std::invalid_argument("net: crop does not fit the network grid");
  }
  if (crop.row0 % 4 != 0 || crop.col0 % 4 != 0 || crop.height % 16 != 0 ||
      crop.width % 16 != 0) {
    throw std::invalid_argument(
        "net: crop origin must be a multiple of 4 and crop extents a multiple of 16");
  }
  if (margin < 3) throw std::invalid_argument("net: margin must be >= 3");
}

const char* kind_name(NetKind kind) {
  return kind == NetKind::assimilator ? "assi" : "corr";
}

NetKind parse_kind(const std::string& name) {
  if (name == "assi") return NetKind::assimilator;
  if (name == "corr") return NetKind::corrector;
  throw std::invalid_argument("unknown network mode '" + name + "' (expected assi or corr)");
}

// ---------------------------------------------------------------------------
// Parameters

NetParams::NetParams(NetConfig config, NetKind kind, const atm::GridSpec& grid)
    : config_(config), kind_(kind), grid_(grid) {
  config_.validate(grid_);
  const auto [w1, w2, w3] = config_.widths;
  const std::size_t c = config_.channels;
  add_down("bg.d1", c, w1);
  add_down("bg.d2", w1, w2);
  add_up("bg.u1", w2, w3);
  if (kind_ == NetKind::assimilator) {
    add_down("obs.d1", config_.obs_planes(), w1);
    add_down("obs.d2", w1, w2);
    add_up("obs.u1", w2, w3);
    add_down("mix.d1", config_.mixed_planes(), w1);
    add_down("mix.d2", w1, w2);
    add_up("mix.u1", w2, w3);
    add_fusion("fuse1", w2, w2, w2);
    add_fusion("fuse2", w3, w3, w3);
    add_up("bg.u2", 3 * w3 + w1, w3);
  } else {
    add_up("bg.u2", w3 + w1, w3);
  }
  add_conv("head", w3, c, 3, /*zero=*/true);

  Normalization norm;
  norm.state_mean.assign(c, 0.0);
  norm.state_std.assign(c, 1.0);
  norm.bt_mean.assign(config_.obs_channels, 0.0);
  norm.bt_std.assign(config_.obs_channels, 1.0);
  add("norm.state_mean", Tensor(Shape{c}), false);
  add("norm.state_std", Tensor(Shape{c}), false);
  add("norm.bt_mean", Tensor(Shape{config_.obs_channels}), false);
  add("norm.bt_std", Tensor(Shape{config_.obs_channels}), false);
  set_normalization(norm);
}

NetParams::NetParams(const NetParams& other)
    : config_(other.config_),
      kind_(other.kind_),
      grid_(other.grid_),
      index_(other.index_),
      init_counter_(other.init_counter_) {
  params_.reserve(other.params_.size());
  for (const auto& p : other.params_) params_.emplace_back(p.name(), p.value(), p.trainable());
}

NetParams& NetParams::operator=(const NetParams& other) {
  if (this != &other) *this = NetParams(other);
  return *this;
}

void NetParams::add(const std::string& name, Tensor init, bool trainable) {
  if (!index_.emplace(name, params_.size()).second) {
    throw std::logic_error("duplicate parameter " + name);
  }
  params_.emplace_back(name, std::move(init), trainable);
}

void NetParams::add_conv(const std::string& name, std::size_t in, std::size_t out,
                         std::size_t k, bool zero) {
  Tensor w(Shape{out, in, k, k});
  const std::uint64_t counter = init_counter_++;
  if (!zero) {
    Rng rng(derive_seed(config_.seed, 0x1417, counter));
    const double bound = std::sqrt(3.0 / static_cast<double>(in * k * k));
    for (double& v : w.values()) v = rng.uniform(-bound, bound);
  }
  add(name + ".w", std::move(w));
  add(name + ".b", Tensor(Shape{out}));
}

void NetParams::add_norm(const std::string& name, std::size_t channels) {
  add(name + ".g", Tensor(Shape{channels}, 1.0));
  add(name + ".b", Tensor(Shape{channels}));
}

void NetParams::add_down(const std::string& name, std::size_t in, std::size_t out) {
  add_conv(name + ".conv1", in, out, 2);
  add_norm(name + ".ln", out);
  add_conv(name + ".conv2", out, out, 3);
}

void NetParams::add_up(const std::string& name, std::size_t in, std::size_t out) {
  add_conv(name + ".conv1", in, out, 3);
  add_norm(name + ".ln", out);
  add_conv(name + ".conv2", out, 4 * out, 3);
}

void NetParams::add_fusion(const std::string& name, std::size_t bg, std::size_t ob,
                           std::size_t mx) {
  const auto [w1, w2, w3] = config_.widths;
  add_down(name + ".d1", bg + ob + mx, w1);
  add_down(name + ".d2", w1, w2);
  add_up(name + ".u1", w2, w3);
  add_up(name + ".u2", w3 + w1, w3);
  add_conv(name + ".to_bg", w3, bg, 3);
  add_conv(name + ".to_mix", w3, mx, 3);
  add_conv(name + ".to_obs", w3, ob, 3);
}

diff::Parameter& NetParams::at(const std::string& name) {
  const auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
  return params_[it->second];
}

const diff::Parameter& NetParams::at(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
  return params_[it->second];
}

std::size_t NetParams::trainable_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (p.trainable()) n += p.value().numel();
  }
  return n;
}

std::string NetParams::group_of(const std::string& name) {
  return name.substr(0, name.find('.'));
}

std::vector<std::string> NetParams::groups() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& p : params_) {
    const auto g = group_of(p.name());
    if (seen.insert(g).second) out.push_back(g);
  }
  return out;
}

void NetParams::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void NetParams::set_normalization(const Normalization& norm) {
  const auto put = [&](const std::string& name, const std::vector<double>& v, bool positive) {
    auto& t = at(name).value();
    if (v.size() != t.numel()) {
      throw std::invalid_argument("normalization " + name + " needs " +
                                  std::to_string(t.numel()) + " values");
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!std::isfinite(v[i]) || (positive && !(v[i] > 0.0))) {
        throw std::invalid_argument("normalization " + name + " has an invalid entry");
      }
      t[i] = static_cast<double>(static_cast<float>(v[i]));
    }
  };
  put("norm.state_mean", norm.state_mean, false);
  put("norm.state_std", norm.state_std, true);
  put("norm.bt_mean", norm.bt_mean, false);
  put("norm.bt_std", norm.bt_std, true);
}

Normalization NetParams::normalization() const {
  const auto get = [&](const std::string& name) {
    const auto& t = at(name).value();
    return std::vector<double>(t.values().begin(), t.values().end());
  };
  return {get("norm.state_mean"), get("norm.state_std"), get("norm.bt_mean"),
          get("norm.bt_std")};
}

io::Checkpoint NetParams::to_checkpoint() const {
  io::Checkpoint ck;
  for (const auto& p : params_) ck.tensors.emplace_back(p.name(), p.value());
  ck.meta["kind"] = kind_name(kind_);
  ck.meta["widths"] = config_.widths;
  return ck;
}

void NetParams::load(const io::Checkpoint& ck) {
  for (auto& p : params_) {
    const Tensor* t = ck.find(p.name());
    if (!t) throw std::invalid_argument("checkpoint lacks parameter " + p.name());
    if (t->shape() != p.value().shape()) {
      throw diff::ShapeError("checkpoint parameter " + p.name() + " has shape " +
                             diff::to_string(t->shape()) + ", expected " +
                             diff::to_string(p.value().shape()));
    }
    p.value() = *t;
  }
}

// ---------------------------------------------------------------------------
// Inputs

NetInputs assemble_background(const NetParams& params, const atm::GridState& background) {
  const atm::GridSpec& grid = params.grid();
  if (background.fields().shape() != grid.state_shape()) {
    throw diff::ShapeError("net: background " + diff::to_string(background.fields().shape()) +
                           " does not match grid " + diff::to_string(grid.state_shape()));
  }
  const auto norm = params.normalization();
  Tensor x = background.fields();
  const std::size_t plane = grid.height * grid.width;
  for (std::size_t c = 0; c < grid.channels(); ++c) {
    double* p = x.data() + c * plane;
    for (std::size_t k = 0; k < plane; ++k) p[k] = (p[k] - norm.state_mean[c]) / norm.state_std[c];
  }
  NetInputs in;
  const std::size_t h = even_height(grid);
  in.background = h == grid.height
                      ? std::move(x)
                      : diff::bilinear_resize(Var(std::move(x)), h, grid.width).value();
  return in;
}

NetInputs assemble_inputs(const NetParams& params, const atm::GridState& background,
                          const obs::SuperObsGrid& so) {
  const NetConfig& cfg = params.config();
  NetInputs in = assemble_background(params, background);
  if (so.crop != cfg.crop) throw std::invalid_argument("net: observation crop differs from the network crop");
  if (so.frames != cfg.frames || so.channels() != cfg.obs_channels) {
    throw std::invalid_argument("net: observations carry " + std::to_string(so.frames) +
                                " frames x " + std::to_string(so.channels()) +
                                " channels, network expects " + std::to_string(cfg.frames) +
                                " x " + std::to_string(cfg.obs_channels));
  }
  const auto norm = params.normalization();
  const std::size_t h = cfg.crop.height, w = cfg.crop.width, k = cfg.obs_channels;
  const std::size_t per_frame = k + obs::kAuxPlanes;
  in.obs = Tensor(Shape{cfg.obs_planes(), h, w});
  for (std::size_t f = 0; f < cfg.frames; ++f) {
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        const bool valid = so.valid(f, i, j);
        for (std::size_t c = 0; c < k; ++c) {
          in.obs.at(f * per_frame + c, i, j) =
              valid ? (so.value(f, c, i, j) - norm.bt_mean[c]) / norm.bt_std[c] : 0.0;
        }
        for (std::size_t e = 0; e < obs::kAuxPlanes; ++e) {
          in.obs.at(f * per_frame + k + e, i, j) = so.aux.at(f * obs::kAuxPlanes + e, i, j);
        }
      }
    }
  }
  const Var bg_crop = diff::crop(Var(in.background), cfg.crop.row0, cfg.crop.col0, h, w);
  const std::array<Var, 2> parts{bg_crop, Var(in.obs)};
  in.mixed = diff::concat_channels(parts).value();
  return in;
}

// ---------------------------------------------------------------------------
// Forward

namespace {

Var conv(const NetParams& p, const std::string& name, const Var& x, int stride, Padding pad) {
  return diff::conv2d(x, p.var(name + ".w"), p.var(name + ".b"), stride, pad);
}

Var down(const NetParams& p, const std::string& name, const Var& x) {
  Var y = conv(p, name + ".conv1", x, 2, Padding::valid);
  y = diff::layer_norm(y, p.var(name + ".ln.g"), p.var(name + ".ln.b"));
  y = diff::silu(y);
  return conv(p, name + ".conv2", y, 1, Padding::same);
}

Var up(const NetParams& p, const std::string& name, const Var& x) {
  Var y = conv(p, name + ".conv1", x, 1, Padding::same);
  y = diff::layer_norm(y, p.var(name + ".ln.g"), p.var(name + ".ln.b"));
  y = diff::silu(y);
  y = conv(p, name + ".conv2", y, 1, Padding::same);
  return diff::pixel_shuffle(y, 2);
}

Var cat(std::initializer_list<Var> parts) {
  const std::vector<Var> v(parts);
  return diff::concat_channels(v);
}

struct Flows {
  Var bg, obs, mix;
};

// One fusion module at 1/scale resolution. The background flow covers the
// whole grid; obs and mixed flows cover the crop.
Flows fuse(const NetParams& p, const std::string& name, const Flows& in, std::size_t scale) {
  const obs::Crop& crop = p.config().crop;
  const std::size_t r = crop.row0 / scale, c = crop.col0 / scale;
  const std::size_t h = crop.height / scale, w = crop.width / scale;
  const Var bg_crop = diff::crop(in.bg, r, c, h, w);
  const Var x = cat({bg_crop, in.obs, in.mix});
  const Var d1 = down(p, name + ".d1", x);
  const Var d2 = down(p, name + ".d2", d1);
  const Var u1 = up(p, name + ".u1", d2);
  const Var u2 = up(p, name + ".u2", cat({u1, d1}));
  Flows out;
  const Var to_bg = conv(p, name + ".to_bg", u2, 1, Padding::same);
  out.bg = in.bg + diff::embed(to_bg, in.bg.shape()[1], in.bg.shape()[2], r, c);
  out.mix = conv(p, name + ".to_mix", u2, 1, Padding::same);
  out.obs = in.obs + conv(p, name + ".to_obs", u2, 1, Padding::same);
  return out;
}

struct Window {
  std::size_t r0, c0, h, w;  // half-resolution cells
};

Window last_stage_window(const NetConfig& cfg, std::size_t half_h, std::size_t half_w) {
  const std::size_t cr = cfg.crop.row0 / 2, cc = cfg.crop.col0 / 2;
  const std::size_t r0 = cr >= cfg.margin ? cr - cfg.margin : 0;
  const std::size_t c0 = cc >= cfg.margin ? cc - cfg.margin : 0;
  const std::size_t r1 = std::min(half_h, cr + cfg.crop.height / 2 + cfg.margin);
  const std::size_t c1 = std::min(half_w, cc + cfg.crop.width / 2 + cfg.margin);
  return {r0, c0, r1 - r0, c1 - c0};
}

Var finish(const NetParams& p, const atm::GridState& background, const Var& u2_input,
           const Window& win) {
  const NetConfig& cfg = p.config();
  const atm::GridSpec& grid = p.grid();
  const Var u2 = up(p, "bg.u2", u2_input);
  const Var head = conv(p, "head", u2, 1, Padding::same);
  const Var inc = diff::crop(head, cfg.crop.row0 - 2 * win.r0, cfg.crop.col0 - 2 * win.c0,
                             cfg.crop.height, cfg.crop.width);
  const auto norm = p.normalization();
  const std::vector<double> zero(cfg.channels, 0.0);
  const Var physical = diff::channel_affine(inc, norm.state_std, zero);
  const std::size_t h = even_height(grid);
  Var canvas = diff::embed(physical, h, grid.width, cfg.crop.row0, cfg.crop.col0);
  if (h != grid.height) canvas = diff::bilinear_resize(canvas, grid.height, grid.width);
  return Var(background.fields()) + canvas;
}

}  // namespace

Var forward_var(const NetParams& p, const atm::GridState& background, const NetInputs& in) {
  const NetConfig& cfg = p.config();
  const Var x(in.background);
  const Var b1 = down(p, "bg.d1", x);
  Var b2 = down(p, "bg.d2", b1);
  const Window win = last_stage_window(cfg, b1.shape()[1], b1.shape()[2]);
  const auto window = [&](const Var& v) { return diff::crop(v, win.r0, win.c0, win.h, win.w); };

  if (p.kind() == NetKind::corrector) {
    const Var u1 = up(p, "bg.u1", b2);
    return finish(p, background, cat({window(u1), window(b1)}), win);
  }
  if (in.obs.empty() || in.mixed.empty()) {
    throw std::invalid_argument("net: the assimilator needs observation inputs");
  }
  const Var o1 = down(p, "obs.d1", Var(in.obs));
  const Var m1 = down(p, "mix.d1", Var(in.mixed));
  Flows f1{b2, down(p, "obs.d2", o1), down(p, "mix.d2", m1)};
  f1 = fuse(p, "fuse1", f1, 4);
  Flows f2{up(p, "bg.u1", f1.bg), up(p, "obs.u1", f1.obs), up(p, "mix.u1", f1.mix)};
  f2 = fuse(p, "fuse2", f2, 2);
  const std::size_t top = cfg.crop.row0 / 2 - win.r0, left = cfg.crop.col0 / 2 - win.c0;
  const Var mix_w = diff::embed(f2.mix, win.h, win.w, top, left);
  const Var obs_w = diff::embed(f2.obs, win.h, win.w, top, left);
  return finish(p, background, cat({window(f2.bg), window(b1), mix_w, obs_w}), win);
}

Var analysis_var(const NetParams& p, const atm::GridState& background,
                 const obs::SuperObsGrid* so) {
  if (p.kind() == NetKind::corrector || so == nullptr) {
    if (p.kind() == NetKind::assimilator) {
      throw std::invalid_argument("net: the assimilator needs observations");
    }
    return forward_var(p, background, assemble_background(p, background));
  }
  return forward_var(p, background, assemble_inputs(p, background, *so));
}

atm::GridState analyze(const NetParams& p, const atm::GridState& background,
                       const obs::SuperObsGrid* so) {
  return atm::GridState(analysis_var(p, background, so).value());
}

atm::GridState forward(const NetParams& p, const atm::GridState& background,
                       const obs::SuperObsGrid& so) {
  if (p.kind() != NetKind::assimilator) {
    throw std::invalid_argument("forward: parameters belong to a corrector");
  }
  return analyze(p, background, &so);
}

atm::GridState forward_corr(const NetParams& p, const atm::GridState& background) {
  if (p.kind() != NetKind::corrector) {
    throw std::invalid_argument("forward_corr: parameters belong to an assimilator");
  }
  return analyze(p, background, nullptr);
}

}  // namespace fxda::net
