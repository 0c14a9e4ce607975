/*
 * Copyright 2026 The ConvMixer-KWS Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "kws/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

namespace kws::ops {
namespace {

// Reductions accumulate in double regardless of the storage type.
using Acc = double;

[[noreturn]] void fail(const std::string& op, const std::string& what) {
  throw std::invalid_argument(op + ": " + what);
}

template <typename T>
void require_same_shape(const std::string& op, const BasicTensor<T>& a,
                        const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) {
    fail(op, "shape mismatch " + shape_string(a.shape()) + " vs " +
                 shape_string(b.shape()));
  }
}

template <typename T>
T logistic(T z) {
  if (z >= T(0)) return T(1) / (T(1) + std::exp(-z));
  const T e = std::exp(z);
  return e / (T(1) + e);
}

struct ConvGeometry {
  long batch, in_ch, out_ch, height, width, kh, kw, groups;
  long in_per_group() const { return in_ch / groups; }
  long out_per_group() const { return out_ch / groups; }
  long plane() const { return height * width; }
  long pad_h() const { return (kh - 1) / 2; }
  long pad_w() const { return (kw - 1) / 2; }
};

// Output rows/cols o in [lo, hi) read input o + shift.
inline void valid_range(long extent, long shift, long& lo, long& hi) {
  lo = std::max(0L, -shift);
  hi = std::min(extent, extent - shift);
}

template <typename T>
void conv_forward(const ConvGeometry& g, const T* x, const T* w, const T* b,
                  T* y) {
  const long icpg = g.in_per_group(), ocpg = g.out_per_group();
  const long plane = g.plane();
#pragma omp parallel for collapse(2) schedule(static)
  for (long n = 0; n < g.batch; ++n) {
    for (long oc = 0; oc < g.out_ch; ++oc) {
      T* yp = y + (n * g.out_ch + oc) * plane;
      std::fill(yp, yp + plane, b ? b[oc] : T(0));
      const long grp = oc / ocpg;
      for (long icl = 0; icl < icpg; ++icl) {
        const long ic = grp * icpg + icl;
        const T* xp = x + (n * g.in_ch + ic) * plane;
        const T* wp = w + (oc * icpg + icl) * g.kh * g.kw;
        for (long i = 0; i < g.kh; ++i) {
          const long dh = i - g.pad_h();
          long h0, h1;
          valid_range(g.height, dh, h0, h1);
          for (long j = 0; j < g.kw; ++j) {
            const long dw = j - g.pad_w();
            long w0, w1;
            valid_range(g.width, dw, w0, w1);
            const T wv = wp[i * g.kw + j];
            for (long oh = h0; oh < h1; ++oh) {
              T* yr = yp + oh * g.width;
              const T* xr = xp + (oh + dh) * g.width + dw;
              for (long ow = w0; ow < w1; ++ow) yr[ow] += wv * xr[ow];
            }
          }
        }
      }
    }
  }
  (void)ocpg;
}

template <typename T>
void conv_backward_input(const ConvGeometry& g, const T* dy, const T* w,
                         T* dx) {
  const long icpg = g.in_per_group(), ocpg = g.out_per_group();
  const long plane = g.plane();
#pragma omp parallel for collapse(2) schedule(static)
  for (long n = 0; n < g.batch; ++n) {
    for (long ic = 0; ic < g.in_ch; ++ic) {
      T* dxp = dx + (n * g.in_ch + ic) * plane;
      const long grp = ic / icpg, icl = ic % icpg;
      for (long ocl = 0; ocl < ocpg; ++ocl) {
        const long oc = grp * ocpg + ocl;
        const T* dyp = dy + (n * g.out_ch + oc) * plane;
        const T* wp = w + (oc * icpg + icl) * g.kh * g.kw;
        for (long i = 0; i < g.kh; ++i) {
          const long dh = i - g.pad_h();
          long h0, h1;
          valid_range(g.height, dh, h0, h1);
          for (long j = 0; j < g.kw; ++j) {
            const long dw = j - g.pad_w();
            long w0, w1;
            valid_range(g.width, dw, w0, w1);
            const T wv = wp[i * g.kw + j];
            for (long oh = h0; oh < h1; ++oh) {
              const T* dyr = dyp + oh * g.width;
              T* dxr = dxp + (oh + dh) * g.width + dw;
              for (long ow = w0; ow < w1; ++ow) dxr[ow] += wv * dyr[ow];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv_backward_weight(const ConvGeometry& g, const T* dy, const T* x,
                          T* dw_out) {
  const long icpg = g.in_per_group(), ocpg = g.out_per_group();
  const long plane = g.plane();
#pragma omp parallel for schedule(static)
  for (long oc = 0; oc < g.out_ch; ++oc) {
    const long grp = oc / ocpg;
    for (long icl = 0; icl < icpg; ++icl) {
      const long ic = grp * icpg + icl;
      for (long i = 0; i < g.kh; ++i) {
        const long dh = i - g.pad_h();
        long h0, h1;
        valid_range(g.height, dh, h0, h1);
        for (long j = 0; j < g.kw; ++j) {
          const long dw = j - g.pad_w();
          long w0, w1;
          valid_range(g.width, dw, w0, w1);
          Acc acc = 0;
          for (long n = 0; n < g.batch; ++n) {
            const T* dyp = dy + (n * g.out_ch + oc) * plane;
            const T* xp = x + (n * g.in_ch + ic) * plane;
            for (long oh = h0; oh < h1; ++oh) {
              const T* dyr = dyp + oh * g.width;
              const T* xr = xp + (oh + dh) * g.width + dw;
              T part = 0;
              for (long ow = w0; ow < w1; ++ow) part += dyr[ow] * xr[ow];
              acc += part;
            }
          }
          dw_out[((oc * icpg + icl) * g.kh + i) * g.kw + j] +=
              static_cast<T>(acc);
        }
      }
    }
  }
}

}  // namespace

template <typename T>
BasicTensor<T> conv(BasicTape<T>& tape, const BasicTensor<T>& x,
                    const BasicTensor<T>& w, const BasicTensor<T>& bias,
                    ConvSpec spec) {
  const std::string op = "conv";
  if (spec.dims != 1 && spec.dims != 2) fail(op, "dims must be 1 or 2");
  const std::size_t rank = static_cast<std::size_t>(spec.dims) + 2;
  if (x.rank() != rank || w.rank() != rank) {
    fail(op, "expected rank-" + std::to_string(rank) + " input and kernel, got " +
                 shape_string(x.shape()) + " and " + shape_string(w.shape()));
  }
  if (spec.groups == 0) fail(op, "groups must be positive");
  ConvGeometry g{};
  g.batch = static_cast<long>(x.dim(0));
  g.in_ch = static_cast<long>(x.dim(1));
  g.height = spec.dims == 2 ? static_cast<long>(x.dim(2)) : 1;
  g.width = static_cast<long>(x.dim(rank - 1));
  g.out_ch = static_cast<long>(w.dim(0));
  g.kh = spec.dims == 2 ? static_cast<long>(w.dim(2)) : 1;
  g.kw = static_cast<long>(w.dim(rank - 1));
  g.groups = static_cast<long>(spec.groups);
  if (g.in_ch % g.groups != 0 || g.out_ch % g.groups != 0) {
    fail(op, "channels " + std::to_string(g.in_ch) + "->" +
                 std::to_string(g.out_ch) + " not divisible by groups " +
                 std::to_string(g.groups));
  }
  if (static_cast<long>(w.dim(1)) != g.in_per_group()) {
    fail(op, "kernel expects " + std::to_string(w.dim(1)) +
                 " input channels per group, input provides " +
                 std::to_string(g.in_per_group()));
  }
  if (bias.defined() && static_cast<long>(bias.size()) != g.out_ch) {
    fail(op, "bias length does not match output channels");
  }

  Shape out_shape = x.shape();
  out_shape[1] = static_cast<std::size_t>(g.out_ch);
  BasicTensor<T> out(out_shape);
  conv_forward<T>(g, x.data().data(), w.data().data(),
                  bias.defined() ? bias.data().data() : nullptr,
                  out.data().data());

  if (tape.should_record({&x, &w, &bias})) {
    out.set_requires_grad(true);
    tape.record([x, w, bias, out, g]() {
      if (!out.has_grad()) return;
      const T* dy = out.grad().data();
      if (x.requires_grad()) {
        conv_backward_input<T>(g, dy, w.data().data(), x.grad().data());
      }
      if (w.requires_grad()) {
        conv_backward_weight<T>(g, dy, x.data().data(), w.grad().data());
      }
      if (bias.requires_grad()) {
        auto db = bias.grad();
        const long plane = g.plane();
        for (long oc = 0; oc < g.out_ch; ++oc) {
          Acc acc = 0;
          for (long n = 0; n < g.batch; ++n) {
            const T* p = dy + (n * g.out_ch + oc) * plane;
            for (long k = 0; k < plane; ++k) acc += p[k];
          }
          db[oc] += static_cast<T>(acc);
        }
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> batch_norm(BasicTape<T>& tape, const BasicTensor<T>& x,
                          const BasicTensor<T>& gamma,
                          const BasicTensor<T>& beta, BatchNormStats<T>& stats,
                          Mode mode) {
  const std::string op = "batch_norm";
  if (x.rank() < 2) fail(op, "input needs a channel axis");
  const std::size_t batch = x.dim(0), channels = x.dim(1);
  if (batch == 0) fail(op, "zero batch size");
  if (gamma.size() != channels || beta.size() != channels ||
      stats.mean.size() != channels || stats.var.size() != channels) {
    fail(op, "affine/statistics length does not match channel extent " +
                 std::to_string(channels));
  }
  const std::size_t spatial = x.size() / (batch * channels);
  const std::size_t count = batch * spatial;

  auto xhat = std::make_shared<std::vector<T>>(x.size());
  auto inv_std = std::make_shared<std::vector<T>>(channels);
  BasicTensor<T> out(x.shape());
  const T* xp = x.data().data();
  T* yp = out.data().data();
  const T* gp = gamma.data().data();
  const T* bp = beta.data().data();
  T* rm = stats.mean.data().data();
  T* rv = stats.var.data().data();

#pragma omp parallel for schedule(static)
  for (long c = 0; c < static_cast<long>(channels); ++c) {
    T mean, var;
    if (mode == Mode::kTrain) {
      Acc s = 0;
      for (std::size_t n = 0; n < batch; ++n) {
        const T* p = xp + (n * channels + c) * spatial;
        for (std::size_t k = 0; k < spatial; ++k) s += p[k];
      }
      const Acc m = s / static_cast<Acc>(count);
      Acc ss = 0;
      for (std::size_t n = 0; n < batch; ++n) {
        const T* p = xp + (n * channels + c) * spatial;
        for (std::size_t k = 0; k < spatial; ++k) {
          const Acc d = p[k] - m;
          ss += d * d;
        }
      }
      const Acc v = ss / static_cast<Acc>(count);
      mean = static_cast<T>(m);
      var = static_cast<T>(v);
      const Acc unbiased =
          count > 1 ? v * static_cast<Acc>(count) / static_cast<Acc>(count - 1)
                    : v;
      rm[c] = static_cast<T>((1 - stats.momentum) * rm[c] + stats.momentum * m);
      rv[c] = static_cast<T>((1 - stats.momentum) * rv[c] +
                             stats.momentum * unbiased);
    } else {
      mean = rm[c];
      var = rv[c];
    }
    const T is = T(1) / std::sqrt(var + stats.eps);
    (*inv_std)[c] = is;
    for (std::size_t n = 0; n < batch; ++n) {
      const std::size_t base = (n * channels + c) * spatial;
      for (std::size_t k = 0; k < spatial; ++k) {
        const T h = (xp[base + k] - mean) * is;
        (*xhat)[base + k] = h;
        yp[base + k] = gp[c] * h + bp[c];
      }
    }
  }

  if (tape.should_record({&x, &gamma, &beta})) {
    out.set_requires_grad(true);
    tape.record([x, gamma, beta, out, xhat, inv_std, batch, channels, spatial,
                 count, mode]() {
      if (!out.has_grad()) return;
      const T* dy = out.grad().data();
      const T* h = xhat->data();
      T* dx = x.requires_grad() ? x.grad().data() : nullptr;
      T* dg = gamma.requires_grad() ? gamma.grad().data() : nullptr;
      T* db = beta.requires_grad() ? beta.grad().data() : nullptr;
      const T* gp = gamma.data().data();
#pragma omp parallel for schedule(static)
      for (long c = 0; c < static_cast<long>(channels); ++c) {
        Acc sum_dy = 0, sum_dy_h = 0;
        for (std::size_t n = 0; n < batch; ++n) {
          const std::size_t base = (n * channels + c) * spatial;
          for (std::size_t k = 0; k < spatial; ++k) {
            sum_dy += dy[base + k];
            sum_dy_h += static_cast<Acc>(dy[base + k]) * h[base + k];
          }
        }
        if (dg) dg[c] += static_cast<T>(sum_dy_h);
        if (db) db[c] += static_cast<T>(sum_dy);
        if (!dx) continue;
        const T scale = gp[c] * (*inv_std)[c];
        if (mode == Mode::kTrain) {
          const T mean_dy = static_cast<T>(sum_dy / static_cast<Acc>(count));
          const T mean_dy_h =
              static_cast<T>(sum_dy_h / static_cast<Acc>(count));
          for (std::size_t n = 0; n < batch; ++n) {
            const std::size_t base = (n * channels + c) * spatial;
            for (std::size_t k = 0; k < spatial; ++k) {
              dx[base + k] +=
                  scale * (dy[base + k] - mean_dy - h[base + k] * mean_dy_h);
            }
          }
        } else {
          for (std::size_t n = 0; n < batch; ++n) {
            const std::size_t base = (n * channels + c) * spatial;
            for (std::size_t k = 0; k < spatial; ++k) {
              dx[base + k] += scale * dy[base + k];
            }
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> layer_norm(BasicTape<T>& tape, const BasicTensor<T>& x,
                          const BasicTensor<T>& gamma,
                          const BasicTensor<T>& beta, T eps) {
  const std::string op = "layer_norm";
  if (x.rank() < 1 || x.shape().back() < 1) fail(op, "axis extent < 1");
  const std::size_t width = x.shape().back();
  if (gamma.size() != width || beta.size() != width) {
    fail(op, "affine length does not match normalized extent " +
                 std::to_string(width));
  }
  const std::size_t rows = x.size() / width;
  auto xhat = std::make_shared<std::vector<T>>(x.size());
  auto inv_std = std::make_shared<std::vector<T>>(rows);
  BasicTensor<T> out(x.shape());
  const T* xp = x.data().data();
  T* yp = out.data().data();
  const T* gp = gamma.data().data();
  const T* bp = beta.data().data();

#pragma omp parallel for schedule(static)
  for (long r = 0; r < static_cast<long>(rows); ++r) {
    const T* p = xp + r * width;
    Acc s = 0;
    for (std::size_t k = 0; k < width; ++k) s += p[k];
    const Acc m = s / static_cast<Acc>(width);
    Acc ss = 0;
    for (std::size_t k = 0; k < width; ++k) ss += (p[k] - m) * (p[k] - m);
    const T is =
        static_cast<T>(1.0 / std::sqrt(ss / static_cast<Acc>(width) + eps));
    (*inv_std)[r] = is;
    T* h = xhat->data() + r * width;
    T* y = yp + r * width;
    for (std::size_t k = 0; k < width; ++k) {
      h[k] = static_cast<T>(p[k] - m) * is;
      y[k] = gp[k] * h[k] + bp[k];
    }
  }

  if (tape.should_record({&x, &gamma, &beta})) {
    out.set_requires_grad(true);
    tape.record([x, gamma, beta, out, xhat, inv_std, rows, width]() {
      if (!out.has_grad()) return;
      const T* dy = out.grad().data();
      const T* gp = gamma.data().data();
      if (gamma.requires_grad() || beta.requires_grad()) {
        std::vector<Acc> dg(width, 0), db(width, 0);
        for (std::size_t r = 0; r < rows; ++r) {
          const T* d = dy + r * width;
          const T* h = xhat->data() + r * width;
          for (std::size_t k = 0; k < width; ++k) {
            dg[k] += static_cast<Acc>(d[k]) * h[k];
            db[k] += d[k];
          }
        }
        if (gamma.requires_grad()) {
          auto g = gamma.grad();
          for (std::size_t k = 0; k < width; ++k) g[k] += static_cast<T>(dg[k]);
        }
        if (beta.requires_grad()) {
          auto b = beta.grad();
          for (std::size_t k = 0; k < width; ++k) b[k] += static_cast<T>(db[k]);
        }
      }
      if (!x.requires_grad()) return;
      T* dx = x.grad().data();
#pragma omp parallel for schedule(static)
      for (long r = 0; r < static_cast<long>(rows); ++r) {
        const T* d = dy + r * width;
        const T* h = xhat->data() + r * width;
        Acc s1 = 0, s2 = 0;
        for (std::size_t k = 0; k < width; ++k) {
          const Acc dh = static_cast<Acc>(d[k]) * gp[k];
          s1 += dh;
          s2 += dh * h[k];
        }
        const T m1 = static_cast<T>(s1 / static_cast<Acc>(width));
        const T m2 = static_cast<T>(s2 / static_cast<Acc>(width));
        const T is = (*inv_std)[r];
        T* o = dx + r * width;
        for (std::size_t k = 0; k < width; ++k) {
          o[k] += is * (d[k] * gp[k] - m1 - h[k] * m2);
        }
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> linear(BasicTape<T>& tape, const BasicTensor<T>& x,
                      const BasicTensor<T>& w, const BasicTensor<T>& bias) {
  const std::string op = "linear";
  if (x.rank() < 1 || w.rank() != 2) fail(op, "expected (..., in) and (out, in)");
  const std::size_t in = w.dim(1), outf = w.dim(0);
  if (x.shape().back() != in) {
    fail(op, "input extent " + std::to_string(x.shape().back()) +
                 " does not match weight " + shape_string(w.shape()));
  }
  if (bias.defined() && bias.size() != outf) fail(op, "bias length mismatch");
  const std::size_t rows = x.size() / in;
  Shape out_shape = x.shape();
  out_shape.back() = outf;
  BasicTensor<T> out(out_shape);
  const T* xp = x.data().data();
  const T* wp = w.data().data();
  const T* bp = bias.defined() ? bias.data().data() : nullptr;
  T* yp = out.data().data();

#pragma omp parallel for schedule(static)
  for (long r = 0; r < static_cast<long>(rows); ++r) {
    const T* xr = xp + r * in;
    T* yr = yp + r * outf;
    for (std::size_t o = 0; o < outf; ++o) {
      const T* wr = wp + o * in;
      T acc = bp ? bp[o] : T(0);
      for (std::size_t i = 0; i < in; ++i) acc += xr[i] * wr[i];
      yr[o] = acc;
    }
  }

  if (tape.should_record({&x, &w, &bias})) {
    out.set_requires_grad(true);
    tape.record([x, w, bias, out, rows, in, outf]() {
      if (!out.has_grad()) return;
      const T* dy = out.grad().data();
      const T* xp = x.data().data();
      const T* wp = w.data().data();
      if (x.requires_grad()) {
        T* dx = x.grad().data();
#pragma omp parallel for schedule(static)
        for (long r = 0; r < static_cast<long>(rows); ++r) {
          T* dxr = dx + r * in;
          const T* dyr = dy + r * outf;
          for (std::size_t o = 0; o < outf; ++o) {
            const T d = dyr[o];
            const T* wr = wp + o * in;
            for (std::size_t i = 0; i < in; ++i) dxr[i] += d * wr[i];
          }
        }
      }
      if (w.requires_grad()) {
        T* dw = w.grad().data();
#pragma omp parallel for schedule(static)
        for (long o = 0; o < static_cast<long>(outf); ++o) {
          std::vector<Acc> acc(in, 0);
          for (std::size_t r = 0; r < rows; ++r) {
            const T d = dy[r * outf + o];
            if (d == T(0)) continue;
            const T* xr = xp + r * in;
            for (std::size_t i = 0; i < in; ++i) acc[i] += d * xr[i];
          }
          T* dwr = dw + o * in;
          for (std::size_t i = 0; i < in; ++i) dwr[i] += static_cast<T>(acc[i]);
        }
      }
      if (bias.requires_grad()) {
        auto db = bias.grad();
        for (std::size_t o = 0; o < outf; ++o) {
          Acc acc = 0;
          for (std::size_t r = 0; r < rows; ++r) acc += dy[r * outf + o];
          db[o] += static_cast<T>(acc);
        }
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> swish(BasicTape<T>& tape, const BasicTensor<T>& x) {
  BasicTensor<T> out(x.shape());
  const T* xp = x.data().data();
  T* yp = out.data().data();
  const long n = static_cast<long>(x.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) yp[i] = xp[i] * logistic(xp[i]);
  if (tape.should_record({&x})) {
    out.set_requires_grad(true);
    tape.record([x, out, n]() {
      if (!out.has_grad()) return;
      const T* dy = out.grad().data();
      const T* xp = x.data().data();
      T* dx = x.grad().data();
#pragma omp parallel for schedule(static)
      for (long i = 0; i < n; ++i) {
        const T s = logistic(xp[i]);
        dx[i] += dy[i] * (s + xp[i] * s * (T(1) - s));
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> gelu(BasicTape<T>& tape, const BasicTensor<T>& x) {
  constexpr T kC = T(0.044715);
  const T k = static_cast<T>(std::sqrt(2.0 / 3.14159265358979323846));
  BasicTensor<T> out(x.shape());
  const T* xp = x.data().data();
  T* yp = out.data().data();
  const long n = static_cast<long>(x.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    const T v = xp[i];
    yp[i] = T(0.5) * v * (T(1) + std::tanh(k * (v + kC * v * v * v)));
  }
  if (tape.should_record({&x})) {
    out.set_requires_grad(true);
    tape.record([x, out, n, k]() {
      if (!out.has_grad()) return;
      const T* dy = out.grad().data();
      const T* xp = x.data().data();
      T* dx = x.grad().data();
#pragma omp parallel for schedule(static)
      for (long i = 0; i < n; ++i) {
        const T v = xp[i];
        const T t = std::tanh(k * (v + kC * v * v * v));
        const T d = T(0.5) * (T(1) + t) +
                    T(0.5) * v * (T(1) - t * t) * k * (T(1) + T(3) * kC * v * v);
        dx[i] += dy[i] * d;
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> transpose_ft(BasicTape<T>& tape, const BasicTensor<T>& x) {
  if (x.rank() < 2) fail("transpose_ft", "rank < 2");
  Shape shape = x.shape();
  const std::size_t rows = shape[shape.size() - 2], cols = shape.back();
  std::swap(shape[shape.size() - 2], shape.back());
  const std::size_t mats = x.size() / (rows * cols);
  BasicTensor<T> out(shape);
  const T* xp = x.data().data();
  T* yp = out.data().data();
  for (std::size_t m = 0; m < mats; ++m) {
    const T* a = xp + m * rows * cols;
    T* b = yp + m * rows * cols;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) b[c * rows + r] = a[r * cols + c];
  }
  if (tape.should_record({&x})) {
    out.set_requires_grad(true);
    tape.record([x, out, mats, rows, cols]() {
      if (!out.has_grad()) return;
      const T* dy = out.grad().data();
      T* dx = x.grad().data();
      for (std::size_t m = 0; m < mats; ++m) {
        T* a = dx + m * rows * cols;
        const T* b = dy + m * rows * cols;
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c)
            a[r * cols + c] += b[c * rows + r];
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> reshape(BasicTape<T>& tape, const BasicTensor<T>& x,
                       Shape shape) {
  if (numel(shape) != x.size()) {
    fail("reshape", "cannot view " + shape_string(x.shape()) + " as " +
                        shape_string(shape));
  }
  BasicTensor<T> out(std::move(shape),
                     std::vector<T>(x.data().begin(), x.data().end()));
  if (tape.should_record({&x})) {
    out.set_requires_grad(true);
    tape.record([x, out]() {
      if (!out.has_grad()) return;
      auto dy = out.grad();
      auto dx = x.grad();
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i];
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> add(BasicTape<T>& tape, const BasicTensor<T>& a,
                   const BasicTensor<T>& b) {
  require_same_shape("add", a, b);
  BasicTensor<T> out(a.shape());
  auto y = out.data();
  auto ap = a.data();
  auto bp = b.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = ap[i] + bp[i];
  if (tape.should_record({&a, &b})) {
    out.set_requires_grad(true);
    tape.record([a, b, out]() {
      if (!out.has_grad()) return;
      auto dy = out.grad();
      for (const auto* t : {&a, &b}) {
        if (!t->requires_grad()) continue;
        auto d = t->grad();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[i];
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> mul(BasicTape<T>& tape, const BasicTensor<T>& a,
                   const BasicTensor<T>& b) {
  require_same_shape("mul", a, b);
  BasicTensor<T> out(a.shape());
  auto y = out.data();
  auto ap = a.data();
  auto bp = b.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = ap[i] * bp[i];
  if (tape.should_record({&a, &b})) {
    out.set_requires_grad(true);
    tape.record([a, b, out]() {
      if (!out.has_grad()) return;
      auto dy = out.grad();
      auto av = a.data();
      auto bv = b.data();
      if (a.requires_grad()) {
        auto d = a.grad();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[i] * bv[i];
      }
      if (b.requires_grad()) {
        auto d = b.grad();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[i] * av[i];
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> sum(BasicTape<T>& tape, const BasicTensor<T>& x) {
  Acc acc = 0;
  for (T v : x.data()) acc += v;
  BasicTensor<T> out(Shape{1}, std::vector<T>{static_cast<T>(acc)});
  if (tape.should_record({&x})) {
    out.set_requires_grad(true);
    tape.record([x, out]() {
      if (!out.has_grad()) return;
      const T d = out.grad()[0];
      for (T& g : x.grad()) g += d;
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> mean_last(BasicTape<T>& tape, const BasicTensor<T>& x) {
  if (x.rank() < 1 || x.shape().back() == 0) fail("mean_last", "empty axis");
  const std::size_t width = x.shape().back();
  const std::size_t rows = x.size() / width;
  Shape shape(x.shape().begin(), x.shape().end() - 1);
  if (shape.empty()) shape.push_back(1);
  BasicTensor<T> out(shape);
  const T* xp = x.data().data();
  T* yp = out.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    Acc acc = 0;
    for (std::size_t k = 0; k < width; ++k) acc += xp[r * width + k];
    yp[r] = static_cast<T>(acc / static_cast<Acc>(width));
  }
  if (tape.should_record({&x})) {
    out.set_requires_grad(true);
    tape.record([x, out, rows, width]() {
      if (!out.has_grad()) return;
      const T* dy = out.grad().data();
      T* dx = x.grad().data();
      const T inv = T(1) / static_cast<T>(width);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t k = 0; k < width; ++k) dx[r * width + k] += dy[r] * inv;
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> bce_with_logits(BasicTape<T>& tape, const BasicTensor<T>& logits,
                               const BasicTensor<T>& targets) {
  require_same_shape("bce_with_logits", logits, targets);
  if (logits.size() == 0) fail("bce_with_logits", "empty batch");
  for (T t : targets.data()) {
    if (!(t >= T(0) && t <= T(1))) {
      fail("bce_with_logits", "target outside [0,1]");
    }
  }
  const auto z = logits.data();
  const auto t = targets.data();
  Acc acc = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const Acc zi = z[i];
    acc += std::max(zi, 0.0) - zi * t[i] + std::log1p(std::exp(-std::abs(zi)));
  }
  const std::size_t n = z.size();
  BasicTensor<T> out(Shape{1},
                     std::vector<T>{static_cast<T>(acc / static_cast<Acc>(n))});
  if (tape.should_record({&logits})) {
    out.set_requires_grad(true);
    tape.record([logits, targets, out, n]() {
      if (!out.has_grad()) return;
      const T scale = out.grad()[0] / static_cast<T>(n);
      const auto z = logits.data();
      const auto t = targets.data();
      auto dz = logits.grad();
      for (std::size_t i = 0; i < n; ++i) {
        dz[i] += scale * (logistic(z[i]) - t[i]);
      }
    });
  }
  return out;
}

#define KWS_INSTANTIATE_OPS(T)                                                 \
  template BasicTensor<T> conv(BasicTape<T>&, const BasicTensor<T>&,           \
                               const BasicTensor<T>&, const BasicTensor<T>&,   \
                               ConvSpec);                                      \
  template BasicTensor<T> batch_norm(BasicTape<T>&, const BasicTensor<T>&,     \
                                     const BasicTensor<T>&,                    \
                                     const BasicTensor<T>&,                    \
                                     BatchNormStats<T>&, Mode);                \
  template BasicTensor<T> layer_norm(BasicTape<T>&, const BasicTensor<T>&,     \
                                     const BasicTensor<T>&,                    \
                                     const BasicTensor<T>&, T);                \
  template BasicTensor<T> linear(BasicTape<T>&, const BasicTensor<T>&,         \
                                 const BasicTensor<T>&, const BasicTensor<T>&); \
  template BasicTensor<T> swish(BasicTape<T>&, const BasicTensor<T>&);         \
  template BasicTensor<T> gelu(BasicTape<T>&, const BasicTensor<T>&);          \
  template BasicTensor<T> transpose_ft(BasicTape<T>&, const BasicTensor<T>&);  \
  template BasicTensor<T> reshape(BasicTape<T>&, const BasicTensor<T>&, Shape); \
  template BasicTensor<T> add(BasicTape<T>&, const BasicTensor<T>&,            \
                              const BasicTensor<T>&);                          \
  template BasicTensor<T> mul(BasicTape<T>&, const BasicTensor<T>&,            \
                              const BasicTensor<T>&);                          \
  template BasicTensor<T> sum(BasicTape<T>&, const BasicTensor<T>&);           \
  template BasicTensor<T> mean_last(BasicTape<T>&, const BasicTensor<T>&);     \
  template BasicTensor<T> bce_with_logits(BasicTape<T>&, const BasicTensor<T>&, \
                                          const BasicTensor<T>&);

KWS_INSTANTIATE_OPS(float)
KWS_INSTANTIATE_OPS(double)

#undef KWS_INSTANTIATE_OPS

}  // namespace kws::ops
