// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#include "fxda/diff/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

namespace fxda::diff {
namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

Tensor* grad_of(const NodePtr& parent) {
  return parent->requires_grad ? &parent->ensure_grad() : nullptr;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " +
                     to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

struct ConvGeometry {
  std::size_t channels, height, width;
  std::size_t kernel, stride, pad;
  std::size_t out_height, out_width;
};

// Column matrix [C*k*k, Ho*Wo]; rows ordered (c, ky, kx) to match the kernel.
void im2col(const double* in, const ConvGeometry& g, double* col) {
  const std::size_t out_pixels = g.out_height * g.out_width;
  const auto pad = static_cast<std::ptrdiff_t>(g.pad);
  for (std::size_t c = 0; c < g.channels; ++c) {
    const double* plane = in + c * g.height * g.width;
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        double* row = col + ((c * g.kernel + ky) * g.kernel + kx) * out_pixels;
        for (std::size_t oy = 0; oy < g.out_height; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - pad;
          double* dst = row + oy * g.out_width;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) {
            std::fill(dst, dst + g.out_width, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(iy) * g.width;
          for (std::size_t ox = 0; ox < g.out_width; ++ox) {
            const auto ix =
                static_cast<std::ptrdiff_t>(ox * g.stride + kx) - pad;
            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width))
                          ? 0.0
                          : src[ix];
          }
        }
      }
    }
  }
}

void col2im_add(const double* col, const ConvGeometry& g, double* out) {
  const std::size_t out_pixels = g.out_height * g.out_width;
  const auto pad = static_cast<std::ptrdiff_t>(g.pad);
  for (std::size_t c = 0; c < g.channels; ++c) {
    double* plane = out + c * g.height * g.width;
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        const double* row =
            col + ((c * g.kernel + ky) * g.kernel + kx) * out_pixels;
        for (std::size_t oy = 0; oy < g.out_height; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - pad;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
          double* dst = plane + static_cast<std::size_t>(iy) * g.width;
          const double* src = row + oy * g.out_width;
          for (std::size_t ox = 0; ox < g.out_width; ++ox) {
            const auto ix =
                static_cast<std::ptrdiff_t>(ox * g.stride + kx) - pad;
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.width)) {
              dst[ix] += src[ox];
            }
          }
        }
      }
    }
  }
}

std::vector<double> as_vector(std::span<const double> s) {
  return {s.begin(), s.end()};
}

}  // namespace

Var conv2d(const Var& input, const Var& kernel, const Var& bias, int stride,
           Padding padding) {
  const Tensor& x = input.value();
  const Tensor& k = kernel.value();
  require_rank3(x, "conv2d input");
  if (k.rank() != 4 || k.extent(2) != k.extent(3) || k.extent(1) != x.extent(0)) {
    throw ShapeError("conv2d: kernel " + to_string(k.shape()) +
                     " incompatible with input " + to_string(x.shape()));
  }
  if (stride < 1) throw ShapeError("conv2d: stride must be positive");
  ConvGeometry g{};
  g.channels = x.extent(0);
  g.height = x.extent(1);
  g.width = x.extent(2);
  g.kernel = k.extent(2);
  g.stride = static_cast<std::size_t>(stride);
  if (padding == Padding::same) {
    if (g.kernel % 2 == 0) {
      throw ShapeError("conv2d: same padding needs an odd kernel, got " +
                       to_string(k.shape()));
    }
    g.pad = g.kernel / 2;
  }
  const std::size_t span_h = g.height + 2 * g.pad;
  const std::size_t span_w = g.width + 2 * g.pad;
  if (span_h < g.kernel || span_w < g.kernel ||
      (padding == Padding::valid &&
       ((span_h - g.kernel) % g.stride || (span_w - g.kernel) % g.stride))) {
    throw ShapeError("conv2d: input " + to_string(x.shape()) +
                     " does not tile under kernel " + to_string(k.shape()) +
                     " stride " + std::to_string(stride));
  }
  g.out_height = (span_h - g.kernel) / g.stride + 1;
  g.out_width = (span_w - g.kernel) / g.stride + 1;
  const std::size_t co = k.extent(0);
  if (bias.defined() && (bias.value().numel() != co)) {
    throw ShapeError("conv2d: bias " + to_string(bias.shape()) +
                     " does not match " + std::to_string(co) + " outputs");
  }

  const std::size_t rows = g.channels * g.kernel * g.kernel;
  const std::size_t pixels = g.out_height * g.out_width;
  const bool pointwise = g.kernel == 1 && g.stride == 1;
  std::vector<double> col;
  if (!pointwise) {
    col.resize(rows * pixels);
    im2col(x.data(), g, col.data());
  }
  const double* col_ptr = pointwise ? x.data() : col.data();

  Tensor out(Shape{co, g.out_height, g.out_width});
  MatMap out_m(out.data(), static_cast<Eigen::Index>(co),
               static_cast<Eigen::Index>(pixels));
  ConstMatMap k_m(k.data(), static_cast<Eigen::Index>(co),
                  static_cast<Eigen::Index>(rows));
  ConstMatMap col_m(col_ptr, static_cast<Eigen::Index>(rows),
                    static_cast<Eigen::Index>(pixels));
  out_m.noalias() = k_m * col_m;
  if (bias.defined()) {
    const double* b = bias.value().data();
    for (std::size_t o = 0; o < co; ++o) out_m.row(o).array() += b[o];
  }

  std::vector<Var> inputs{input, kernel};
  if (bias.defined()) inputs.push_back(bias);
  return make_op(std::move(out), std::move(inputs),
                 [g, co, rows, pixels, pointwise,
                  has_bias = bias.defined()](Node& self) {
                   const auto& in_node = self.parents[0];
                   const auto& k_node = self.parents[1];
                   ConstMatMap dout(self.grad.data(),
                                    static_cast<Eigen::Index>(co),
                                    static_cast<Eigen::Index>(pixels));
                   std::vector<double> col;
                   const double* col_ptr = in_node->value.data();
                   if (Tensor* dk = grad_of(k_node)) {
                     if (!pointwise) {
                       col.resize(rows * pixels);
                       im2col(in_node->value.data(), g, col.data());
                       col_ptr = col.data();
                     }
                     ConstMatMap col_m(col_ptr, static_cast<Eigen::Index>(rows),
                                       static_cast<Eigen::Index>(pixels));
                     MatMap dk_m(dk->data(), static_cast<Eigen::Index>(co),
                                 static_cast<Eigen::Index>(rows));
                     dk_m.noalias() += dout * col_m.transpose();
                   }
                   if (has_bias) {
                     if (Tensor* db = grad_of(self.parents[2])) {
                       for (std::size_t o = 0; o < co; ++o) {
                         (*db)[o] += dout.row(o).sum();
                       }
                     }
                   }
                   if (Tensor* dx = grad_of(in_node)) {
                     ConstMatMap k_m(k_node->value.data(),
                                     static_cast<Eigen::Index>(co),
                                     static_cast<Eigen::Index>(rows));
                     if (pointwise) {
                       MatMap dx_m(dx->data(), static_cast<Eigen::Index>(rows),
                                   static_cast<Eigen::Index>(pixels));
                       dx_m.noalias() += k_m.transpose() * dout;
                     } else {
                       RowMatrix dcol = k_m.transpose() * dout;
                       col2im_add(dcol.data(), g, dx->data());
                     }
                   }
                 });
}

Var layer_norm(const Var& input, const Var& gain, const Var& bias,
               double epsilon) {
  const Tensor& x = input.value();
  require_rank3(x, "layer_norm input");
  const std::size_t c = x.extent(0);
  const std::size_t p = x.extent(1) * x.extent(2);
  if (gain.value().numel() != c || bias.value().numel() != c) {
    throw ShapeError("layer_norm: gain/bias " + to_string(gain.shape()) + "/" +
                     to_string(bias.shape()) + " for " + std::to_string(c) +
                     " channels");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("layer_norm: epsilon <= 0");

  std::vector<double> mean(p, 0.0), inv_std(p, 0.0);
  const double* xd = x.data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* row = xd + ch * p;
    for (std::size_t i = 0; i < p; ++i) mean[i] += row[i];
  }
  for (auto& m : mean) m /= static_cast<double>(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* row = xd + ch * p;
    for (std::size_t i = 0; i < p; ++i) {
      const double d = row[i] - mean[i];
      inv_std[i] += d * d;
    }
  }
  for (auto& v : inv_std) v = 1.0 / std::sqrt(v / static_cast<double>(c) + epsilon);

  Tensor normalized(x.shape());
  Tensor out(x.shape());
  const double* g = gain.value().data();
  const double* b = bias.value().data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* row = xd + ch * p;
    double* nrow = normalized.data() + ch * p;
    double* orow = out.data() + ch * p;
    for (std::size_t i = 0; i < p; ++i) {
      nrow[i] = (row[i] - mean[i]) * inv_std[i];
      orow[i] = g[ch] * nrow[i] + b[ch];
    }
  }

  return make_op(
      std::move(out), {input, gain, bias},
      [c, p, normalized = std::move(normalized),
       inv_std = std::move(inv_std)](Node& self) {
        const double* dy = self.grad.data();
        const double* xn = normalized.data();
        if (Tensor* dg = grad_of(self.parents[1])) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            double acc = 0.0;
            for (std::size_t i = 0; i < p; ++i) acc += dy[ch * p + i] * xn[ch * p + i];
            (*dg)[ch] += acc;
          }
        }
        if (Tensor* db = grad_of(self.parents[2])) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            double acc = 0.0;
            for (std::size_t i = 0; i < p; ++i) acc += dy[ch * p + i];
            (*db)[ch] += acc;
          }
        }
        if (Tensor* dx = grad_of(self.parents[0])) {
          const double* g = self.parents[1]->value.data();
          std::vector<double> sum_d(p, 0.0), sum_dx(p, 0.0);
          for (std::size_t ch = 0; ch < c; ++ch) {
            for (std::size_t i = 0; i < p; ++i) {
              const double d = dy[ch * p + i] * g[ch];
              sum_d[i] += d;
              sum_dx[i] += d * xn[ch * p + i];
            }
          }
          const double inv_c = 1.0 / static_cast<double>(c);
          double* out = dx->data();
          for (std::size_t ch = 0; ch < c; ++ch) {
            for (std::size_t i = 0; i < p; ++i) {
              const double d = dy[ch * p + i] * g[ch];
              out[ch * p + i] += inv_std[i] * (d - inv_c * sum_d[i] -
                                               xn[ch * p + i] * inv_c * sum_dx[i]);
            }
          }
        }
      });
}

Var silu(const Var& input) {
  const Tensor& x = input.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double s = 1.0 / (1.0 + std::exp(-x[i]));
    out[i] = x[i] * s;
  }
  return make_op(std::move(out), {input}, [](Node& self) {
    Tensor* dx = grad_of(self.parents[0]);
    if (!dx) return;
    const Tensor& x = self.parents[0]->value;
    for (std::size_t i = 0; i < x.numel(); ++i) {
      const double s = 1.0 / (1.0 + std::exp(-x[i]));
      (*dx)[i] += self.grad[i] * s * (1.0 + x[i] * (1.0 - s));
    }
  });
}

namespace {

// Maps each output index of a pixel shuffle to its input index.
std::vector<std::size_t> shuffle_index(std::size_t out_c, std::size_t h,
                                       std::size_t w, std::size_t r) {
  std::vector<std::size_t> idx(out_c * r * r * h * w);
  const std::size_t oh = h * r, ow = w * r;
  for (std::size_t c = 0; c < out_c; ++c) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        const std::size_t ic = c * r * r + (y % r) * r + (x % r);
        idx[(c * oh + y) * ow + x] = (ic * h + y / r) * w + x / r;
      }
    }
  }
  return idx;
}

Var gather(const Var& input, Shape out_shape, std::vector<std::size_t> from) {
  const Tensor& x = input.value();
  Tensor out(std::move(out_shape));
  for (std::size_t i = 0; i < from.size(); ++i) out[i] = x[from[i]];
  return make_op(std::move(out), {input}, [from = std::move(from)](Node& self) {
    if (Tensor* dx = grad_of(self.parents[0])) {
      for (std::size_t i = 0; i < from.size(); ++i) (*dx)[from[i]] += self.grad[i];
    }
  });
}

}  // namespace

Var pixel_shuffle(const Var& input, int factor) {
  const Tensor& x = input.value();
  require_rank3(x, "pixel_shuffle input");
  if (factor < 1) throw ShapeError("pixel_shuffle: factor must be positive");
  const auto r = static_cast<std::size_t>(factor);
  if (x.extent(0) % (r * r) != 0) {
    throw ShapeError("pixel_shuffle: " + std::to_string(x.extent(0)) +
                     " channels not divisible by factor^2 = " +
                     std::to_string(r * r));
  }
  const std::size_t oc = x.extent(0) / (r * r);
  const std::size_t h = x.extent(1), w = x.extent(2);
  return gather(input, Shape{oc, h * r, w * r}, shuffle_index(oc, h, w, r));
}

Var pixel_unshuffle(const Var& input, int factor) {
  const Tensor& x = input.value();
  require_rank3(x, "pixel_unshuffle input");
  if (factor < 1) throw ShapeError("pixel_unshuffle: factor must be positive");
  const auto r = static_cast<std::size_t>(factor);
  if (x.extent(1) % r || x.extent(2) % r) {
    throw ShapeError("pixel_unshuffle: extents " + to_string(x.shape()) +
                     " not divisible by " + std::to_string(r));
  }
  const std::size_t c = x.extent(0), h = x.extent(1) / r, w = x.extent(2) / r;
  // Invert the shuffle map.
  const auto fwd = shuffle_index(c, h, w, r);
  std::vector<std::size_t> from(fwd.size());
  for (std::size_t i = 0; i < fwd.size(); ++i) from[fwd[i]] = i;
  return gather(input, Shape{c * r * r, h, w}, std::move(from));
}

namespace {

struct Lerp {
  std::size_t lo, hi;
  double frac;
};

std::vector<Lerp> lerp_table(std::size_t in, std::size_t out) {
  std::vector<Lerp> table(out);
  for (std::size_t i = 0; i < out; ++i) {
    const double pos =
        out > 1 ? static_cast<double>(i) * static_cast<double>(in - 1) /
                      static_cast<double>(out - 1)
                : 0.0;
    auto lo = static_cast<std::size_t>(std::floor(pos));
    lo = std::min(lo, in - 1);
    const std::size_t hi = std::min(lo + 1, in - 1);
    table[i] = {lo, hi, pos - static_cast<double>(lo)};
  }
  return table;
}

}  // namespace

Var bilinear_resize(const Var& input, std::size_t height, std::size_t width) {
  const Tensor& x = input.value();
  require_rank3(x, "bilinear_resize input");
  if (height < 1 || width < 1) {
    throw ShapeError("bilinear_resize: target extents must be >= 1");
  }
  const std::size_t c = x.extent(0), h = x.extent(1), w = x.extent(2);
  auto rows = lerp_table(h, height);
  auto cols = lerp_table(w, width);
  Tensor out(Shape{c, height, width});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < height; ++i) {
      const auto& ry = rows[i];
      for (std::size_t j = 0; j < width; ++j) {
        const auto& rx = cols[j];
        const double top = x.at(ch, ry.lo, rx.lo) * (1.0 - rx.frac) +
                           x.at(ch, ry.lo, rx.hi) * rx.frac;
        const double bot = x.at(ch, ry.hi, rx.lo) * (1.0 - rx.frac) +
                           x.at(ch, ry.hi, rx.hi) * rx.frac;
        out.at(ch, i, j) = top * (1.0 - ry.frac) + bot * ry.frac;
      }
    }
  }
  return make_op(std::move(out), {input},
                 [rows = std::move(rows), cols = std::move(cols)](Node& self) {
                   Tensor* dx = grad_of(self.parents[0]);
                   if (!dx) return;
                   const std::size_t c = dx->extent(0);
                   for (std::size_t ch = 0; ch < c; ++ch) {
                     for (std::size_t i = 0; i < rows.size(); ++i) {
                       const auto& ry = rows[i];
                       for (std::size_t j = 0; j < cols.size(); ++j) {
                         const auto& rx = cols[j];
                         const double g = self.grad.at(ch, i, j);
                         dx->at(ch, ry.lo, rx.lo) += g * (1 - ry.frac) * (1 - rx.frac);
                         dx->at(ch, ry.lo, rx.hi) += g * (1 - ry.frac) * rx.frac;
                         dx->at(ch, ry.hi, rx.lo) += g * ry.frac * (1 - rx.frac);
                         dx->at(ch, ry.hi, rx.hi) += g * ry.frac * rx.frac;
                       }
                     }
                   }
                 });
}

Var concat_channels(std::span<const Var> inputs) {
  if (inputs.empty()) throw ShapeError("concat_channels: no inputs");
  const Tensor& first = inputs[0].value();
  require_rank3(first, "concat_channels input");
  std::size_t channels = 0;
  for (const auto& in : inputs) {
    const Tensor& t = in.value();
    require_rank3(t, "concat_channels input");
    if (t.extent(1) != first.extent(1) || t.extent(2) != first.extent(2)) {
      throw ShapeError("concat_channels: spatial mismatch " +
                       to_string(first.shape()) + " vs " + to_string(t.shape()));
    }
    channels += t.extent(0);
  }
  Tensor out(Shape{channels, first.extent(1), first.extent(2)});
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& in : inputs) {
    offsets.push_back(offset);
    std::copy(in.value().values().begin(), in.value().values().end(),
              out.data() + offset);
    offset += in.value().numel();
  }
  return make_op(std::move(out), {inputs.begin(), inputs.end()},
                 [offsets = std::move(offsets)](Node& self) {
                   for (std::size_t k = 0; k < self.parents.size(); ++k) {
                     if (Tensor* d = grad_of(self.parents[k])) {
                       const double* g = self.grad.data() + offsets[k];
                       for (std::size_t i = 0; i < d->numel(); ++i) (*d)[i] += g[i];
                     }
                   }
                 });
}

Var crop(const Var& input, std::size_t top, std::size_t left,
         std::size_t height, std::size_t width) {
  const Tensor& x = input.value();
  require_rank3(x, "crop input");
  if (top + height > x.extent(1) || left + width > x.extent(2)) {
    throw ShapeError("crop: window at (" + std::to_string(top) + "," +
                     std::to_string(left) + ") size " + std::to_string(height) +
                     "x" + std::to_string(width) + " exceeds " +
                     to_string(x.shape()));
  }
  const std::size_t c = x.extent(0);
  Tensor out(Shape{c, height, width});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < height; ++i)
      for (std::size_t j = 0; j < width; ++j)
        out.at(ch, i, j) = x.at(ch, top + i, left + j);
  return make_op(std::move(out), {input}, [top, left](Node& self) {
    Tensor* dx = grad_of(self.parents[0]);
    if (!dx) return;
    const Shape& s = self.grad.shape();
    for (std::size_t ch = 0; ch < s[0]; ++ch)
      for (std::size_t i = 0; i < s[1]; ++i)
        for (std::size_t j = 0; j < s[2]; ++j)
          dx->at(ch, top + i, left + j) += self.grad.at(ch, i, j);
  });
}

Var embed(const Var& input, std::size_t height, std::size_t width,
          std::size_t top, std::size_t left) {
  const Tensor& x = input.value();
  require_rank3(x, "embed input");
  if (top + x.extent(1) > height || left + x.extent(2) > width) {
    throw ShapeError("embed: " + to_string(x.shape()) + " at (" +
                     std::to_string(top) + "," + std::to_string(left) +
                     ") exceeds canvas " + std::to_string(height) + "x" +
                     std::to_string(width));
  }
  const std::size_t c = x.extent(0);
  Tensor out(Shape{c, height, width});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < x.extent(1); ++i)
      for (std::size_t j = 0; j < x.extent(2); ++j)
        out.at(ch, top + i, left + j) = x.at(ch, i, j);
  return make_op(std::move(out), {input}, [top, left](Node& self) {
    Tensor* dx = grad_of(self.parents[0]);
    if (!dx) return;
    const Shape& s = dx->shape();
    for (std::size_t ch = 0; ch < s[0]; ++ch)
      for (std::size_t i = 0; i < s[1]; ++i)
        for (std::size_t j = 0; j < s[2]; ++j)
          dx->at(ch, i, j) += self.grad.at(ch, top + i, left + j);
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] + b.value()[i];
  return make_op(std::move(out), {a, b}, [](Node& self) {
    for (const auto& p : self.parents) {
      if (Tensor* d = grad_of(p)) {
        for (std::size_t i = 0; i < d->numel(); ++i) (*d)[i] += self.grad[i];
      }
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] - b.value()[i];
  return make_op(std::move(out), {a, b}, [](Node& self) {
    if (Tensor* d = grad_of(self.parents[0])) {
      for (std::size_t i = 0; i < d->numel(); ++i) (*d)[i] += self.grad[i];
    }
    if (Tensor* d = grad_of(self.parents[1])) {
      for (std::size_t i = 0; i < d->numel(); ++i) (*d)[i] -= self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] * b.value()[i];
  return make_op(std::move(out), {a, b}, [](Node& self) {
    const Tensor& av = self.parents[0]->value;
    const Tensor& bv = self.parents[1]->value;
    if (Tensor* d = grad_of(self.parents[0])) {
      for (std::size_t i = 0; i < d->numel(); ++i) (*d)[i] += self.grad[i] * bv[i];
    }
    if (Tensor* d = grad_of(self.parents[1])) {
      for (std::size_t i = 0; i < d->numel(); ++i) (*d)[i] += self.grad[i] * av[i];
    }
  });
}

Var mul_const(const Var& a, const Tensor& factor) {
  require_same_shape(a.value(), factor, "mul_const");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] * factor[i];
  return make_op(std::move(out), {a}, [factor](Node& self) {
    if (Tensor* d = grad_of(self.parents[0])) {
      for (std::size_t i = 0; i < d->numel(); ++i) (*d)[i] += self.grad[i] * factor[i];
    }
  });
}

Var scale(const Var& a, double factor) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] * factor;
  return make_op(std::move(out), {a}, [factor](Node& self) {
    if (Tensor* d = grad_of(self.parents[0])) {
      for (std::size_t i = 0; i < d->numel(); ++i) (*d)[i] += self.grad[i] * factor;
    }
  });
}

Var channel_affine(const Var& input, std::span<const double> factor,
                   std::span<const double> offset) {
  const Tensor& x = input.value();
  require_rank3(x, "channel_affine input");
  const std::size_t c = x.extent(0);
  if (factor.size() != c || offset.size() != c) {
    throw ShapeError("channel_affine: " + std::to_string(factor.size()) +
                     " factors for " + to_string(x.shape()));
  }
  const std::size_t p = x.extent(1) * x.extent(2);
  Tensor out(x.shape());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < p; ++i)
      out[ch * p + i] = x[ch * p + i] * factor[ch] + offset[ch];
  return make_op(std::move(out), {input},
                 [f = as_vector(factor), p](Node& self) {
                   Tensor* d = grad_of(self.parents[0]);
                   if (!d) return;
                   for (std::size_t ch = 0; ch < f.size(); ++ch)
                     for (std::size_t i = 0; i < p; ++i)
                       (*d)[ch * p + i] += self.grad[ch * p + i] * f[ch];
                 });
}

Var abs(const Var& input) {
  const Tensor& x = input.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = std::abs(x[i]);
  return make_op(std::move(out), {input}, [](Node& self) {
    Tensor* d = grad_of(self.parents[0]);
    if (!d) return;
    const Tensor& x = self.parents[0]->value;
    for (std::size_t i = 0; i < x.numel(); ++i) {
      const double s = x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0);
      (*d)[i] += self.grad[i] * s;
    }
  });
}

Var sum(const Var& input) {
  double acc = 0.0;
  for (double v : input.value().values()) acc += v;
  return make_op(Tensor::scalar(acc), {input}, [](Node& self) {
    if (Tensor* d = grad_of(self.parents[0])) {
      const double g = self.grad[0];
      for (std::size_t i = 0; i < d->numel(); ++i) (*d)[i] += g;
    }
  });
}

Var weighted_sum(const Var& input, const Tensor& weights) {
  require_same_shape(input.value(), weights, "weighted_sum");
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.numel(); ++i) acc += weights[i] * input.value()[i];
  return make_op(Tensor::scalar(acc), {input}, [weights](Node& self) {
    if (Tensor* d = grad_of(self.parents[0])) {
      const double g = self.grad[0];
      for (std::size_t i = 0; i < d->numel(); ++i) (*d)[i] += g * weights[i];
    }
  });
}

}  // namespace fxda::diff
