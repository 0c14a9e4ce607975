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

#include "kws/model.hpp"

#include <cmath>
#include <stdexcept>

namespace kws {

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v < 1) throw std::invalid_argument(std::string("model config: ") + name + " must be >= 1");
  };
  positive(n_mels, "n_mels");
  positive(n_frames, "n_frames");
  positive(channels, "channels");
  positive(kernel_pre, "kernel_pre");
  positive(kernel_block_1d, "kernel_block_1d");
  positive(kernel_block_2d_freq, "kernel_block_2d_freq");
  positive(kernel_block_2d_time, "kernel_block_2d_time");
  positive(depth, "depth");
  positive(kernel_post, "kernel_post");
  positive(mixer_hidden_t, "mixer_hidden_t");
  positive(mixer_hidden_f, "mixer_hidden_f");
  positive(n_classes, "n_classes");
}

namespace {

template <typename T>
BasicTensor<T> uniform_param(Shape shape, double bound, Rng& rng) {
  std::vector<T> v(numel(shape));
  for (auto& x : v) x = static_cast<T>((2.0 * uniform01(rng) - 1.0) * bound);
  return BasicTensor<T>(std::move(shape), std::move(v), true);
}

template <typename T>
BasicTensor<T> constant(Shape shape, T value, bool requires_grad) {
  const std::size_t n = numel(shape);
  return BasicTensor<T>(std::move(shape), std::vector<T>(n, value), requires_grad);
}

// He-uniform weights over the fan-in, zero bias.
template <typename T>
ConvLayer<T> make_conv(int dims, std::size_t in, std::size_t out, std::size_t groups,
                       std::size_t kh, std::size_t kw, Rng& rng) {
  ConvLayer<T> l;
  l.spec.dims = dims;
  l.spec.groups = groups;
  Shape ws = dims == 1 ? Shape{out, in / groups, kw} : Shape{out, in / groups, kh, kw};
  const double fan_in = static_cast<double>(in / groups * kh * kw);
  l.weight = uniform_param<T>(ws, std::sqrt(6.0 / fan_in), rng);
  l.bias = constant<T>({out}, T(0), true);
  return l;
}

template <typename T>
DwsConv<T> make_dws(int dims, std::size_t in, std::size_t out, std::size_t kh, std::size_t kw,
                    Rng& rng) {
  DwsConv<T> d;
  d.depthwise = make_conv<T>(dims, in, in, in, kh, kw, rng);
  d.pointwise = make_conv<T>(dims, in, out, 1, 1, 1, rng);
  return d;
}

template <typename T>
BatchNormLayer<T> make_bn(std::size_t channels) {
  BatchNormLayer<T> bn;
  bn.gamma = constant<T>({channels}, T(1), true);
  bn.beta = constant<T>({channels}, T(0), true);
  bn.stats.mean = constant<T>({channels}, T(0), false);
  bn.stats.var = constant<T>({channels}, T(1), false);
  return bn;
}

template <typename T>
LayerNormLayer<T> make_ln(std::size_t width) {
  return {constant<T>({width}, T(1), true), constant<T>({width}, T(0), true)};
}

template <typename T>
LinearLayer<T> make_linear(std::size_t in, std::size_t out, Rng& rng) {
  LinearLayer<T> l;
  l.weight = uniform_param<T>({out, in}, std::sqrt(6.0 / static_cast<double>(in)), rng);
  l.bias = constant<T>({out}, T(0), true);
  return l;
}

template <typename T>
ConvBnBlock<T> make_conv_bn(std::size_t in, std::size_t out, std::size_t kernel, Rng& rng) {
  return {make_dws<T>(1, in, out, 1, kernel, rng), make_bn<T>(out)};
}

template <typename T>
BasicTensor<T> apply(BasicTape<T>& tape, const ConvLayer<T>& l, const BasicTensor<T>& x) {
  return ops::conv(tape, x, l.weight, l.bias, l.spec);
}

template <typename T>
BasicTensor<T> apply(BasicTape<T>& tape, const DwsConv<T>& d, const BasicTensor<T>& x) {
  return apply(tape, d.pointwise, apply(tape, d.depthwise, x));
}

template <typename T>
BasicTensor<T> apply(BasicTape<T>& tape, BatchNormLayer<T>& bn, const BasicTensor<T>& x,
                     ops::Mode mode) {
  return ops::batch_norm(tape, x, bn.gamma, bn.beta, bn.stats, mode);
}

template <typename T>
BasicTensor<T> apply(BasicTape<T>& tape, const LinearLayer<T>& l, const BasicTensor<T>& x) {
  return ops::linear(tape, x, l.weight, l.bias);
}

template <typename T>
BasicTensor<T> apply(BasicTape<T>& tape, const LayerNormLayer<T>& l, const BasicTensor<T>& x) {
  return ops::layer_norm(tape, x, l.gamma, l.beta);
}

template <typename T>
BasicTensor<T> apply(BasicTape<T>& tape, ConvBnBlock<T>& b, const BasicTensor<T>& x,
                     ops::Mode mode) {
  return ops::swish(tape, apply(tape, b.bn, apply(tape, b.dws, x), mode));
}

// Visitors over (name, tensor); `params` selects trainable tensors,
// otherwise running statistics.
template <typename T, typename Fn>
void visit_conv(const std::string& p, const ConvLayer<T>& l, Fn& fn) {
  fn(p + ".weight", l.weight);
  fn(p + ".bias", l.bias);
}

template <typename T, typename Fn>
void visit_dws(const std::string& p, const DwsConv<T>& d, Fn& fn) {
  visit_conv(p + ".dw", d.depthwise, fn);
  visit_conv(p + ".pw", d.pointwise, fn);
}

template <typename T, typename Fn>
void visit_bn(const std::string& p, const BatchNormLayer<T>& bn, bool params, Fn& fn) {
  if (params) {
    fn(p + ".gamma", bn.gamma);
    fn(p + ".beta", bn.beta);
  } else {
    fn(p + ".running_mean", bn.stats.mean);
    fn(p + ".running_var", bn.stats.var);
  }
}

template <typename T, typename Fn>
void visit_linear(const std::string& p, const LinearLayer<T>& l, Fn& fn) {
  fn(p + ".weight", l.weight);
  fn(p + ".bias", l.bias);
}

template <typename T, typename Fn>
void visit_ln(const std::string& p, const LayerNormLayer<T>& l, Fn& fn) {
  fn(p + ".gamma", l.gamma);
  fn(p + ".beta", l.beta);
}

template <typename T, typename Fn>
void visit_model(const BasicConvMixerModel<T>& m, bool params, Fn&& fn) {
  auto conv_bn = [&](const std::string& p, const ConvBnBlock<T>& b) {
    if (params) visit_dws(p, b.dws, fn);
    visit_bn(p + ".bn", b.bn, params, fn);
  };
  conv_bn("pre", m.pre);
  for (std::size_t i = 0; i < m.blocks.size(); ++i) {
    const auto& b = m.blocks[i];
    const std::string p = "blocks." + std::to_string(i);
    if (params) {
      visit_conv(p + ".f_expand", b.f_expand, fn);
      visit_dws(p + ".f1", b.f1, fn);
      visit_conv(p + ".f_compress", b.f_compress, fn);
    }
    visit_bn(p + ".bn_freq", b.bn_freq, params, fn);
    if (params) visit_dws(p + ".f2", b.f2, fn);
    visit_bn(p + ".bn_temp", b.bn_temp, params, fn);
    if (params && b.mixer) {
      visit_ln(p + ".mixer.norm_t", b.mixer->norm_t, fn);
      visit_linear(p + ".mixer.w1", b.mixer->w1, fn);
      visit_linear(p + ".mixer.w2", b.mixer->w2, fn);
      visit_ln(p + ".mixer.norm_f", b.mixer->norm_f, fn);
      visit_linear(p + ".mixer.w3", b.mixer->w3, fn);
      visit_linear(p + ".mixer.w4", b.mixer->w4, fn);
    }
  }
  conv_bn("post", m.post);
  if (params) visit_linear("head", m.head, fn);
}

}  // namespace

template <typename T>
Named<T> BasicConvMixerModel<T>::parameters() const {
  Named<T> out;
  visit_model(*this, true, [&](const std::string& n, const BasicTensor<T>& t) { out.emplace_back(n, t); });
  return out;
}

template <typename T>
Named<T> BasicConvMixerModel<T>::buffers() const {
  Named<T> out;
  visit_model(*this, false, [&](const std::string& n, const BasicTensor<T>& t) { out.emplace_back(n, t); });
  return out;
}

template <typename T>
Named<T> BasicConvMixerModel<T>::state() const {
  Named<T> out = parameters();
  for (auto& b : buffers()) out.push_back(std::move(b));
  return out;
}

template <typename T>
MixerLayer<T> build_mixer(std::size_t frames, std::size_t channels, std::size_t hidden_t,
                          std::size_t hidden_f, Rng& rng) {
  MixerLayer<T> m;
  m.norm_t = make_ln<T>(frames);
  m.w1 = make_linear<T>(frames, hidden_t, rng);
  m.w2 = make_linear<T>(hidden_t, frames, rng);
  m.norm_f = make_ln<T>(channels);
  m.w3 = make_linear<T>(channels, hidden_f, rng);
  m.w4 = make_linear<T>(hidden_f, channels, rng);
  return m;
}

template <typename T>
ConvMixerBlock<T> build_block(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t c = cfg.channels, d = cfg.depth;
  const std::size_t kh = cfg.kernel_block_2d_freq, kw = cfg.kernel_block_2d_time;
  ConvMixerBlock<T> b;
  b.f_expand = make_conv<T>(2, 1, d, 1, kh, kw, rng);
  b.f1 = make_dws<T>(2, d, d, kh, kw, rng);
  b.f_compress = make_conv<T>(2, d, 1, 1, 1, 1, rng);
  b.bn_freq = make_bn<T>(c);
  b.f2 = make_dws<T>(1, c, c, 1, cfg.kernel_block_1d, rng);
  b.bn_temp = make_bn<T>(c);
  if (cfg.mixer_enabled) {
    b.mixer = build_mixer<T>(cfg.n_frames, c, cfg.mixer_hidden_t, cfg.mixer_hidden_f, rng);
  }
  return b;
}

template <typename T>
BasicConvMixerModel<T> build_model(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  BasicConvMixerModel<T> m;
  m.config = cfg;
  m.pre = make_conv_bn<T>(cfg.n_mels, cfg.channels, cfg.kernel_pre, rng);
  for (std::size_t i = 0; i < cfg.n_blocks; ++i) m.blocks.push_back(build_block<T>(cfg, rng));
  m.post = make_conv_bn<T>(cfg.channels, cfg.channels, cfg.kernel_post, rng);
  m.head = make_linear<T>(cfg.channels, cfg.n_classes, rng);
  return m;
}

template <typename T>
BasicTensor<T> mixer_forward(BasicTape<T>& tape, const MixerLayer<T>& m, const BasicTensor<T>& x) {
  if (x.rank() != 3 || x.dim(2) != m.w1.weight.dim(1) || x.dim(1) != m.w3.weight.dim(1)) {
    throw std::invalid_argument("mixer_forward: input " + shape_string(x.shape()) +
                                " does not match mixer (C=" + std::to_string(m.w3.weight.dim(1)) +
                                ", T=" + std::to_string(m.w1.weight.dim(1)) + ")");
  }
  // Temporal mixing: every channel row is a length-T token.
  auto h = apply(tape, m.w2, ops::gelu(tape, apply(tape, m.w1, apply(tape, m.norm_t, x))));
  auto u = ops::add(tape, x, h);
  // Channel mixing on the transposed map, then back to (C, T).
  auto ut = ops::transpose_ft(tape, u);
  auto g = apply(tape, m.w4, ops::gelu(tape, apply(tape, m.w3, apply(tape, m.norm_f, ut))));
  return ops::transpose_ft(tape, ops::add(tape, ut, g));
}

template <typename T>
BasicTensor<T> convmixer_block_forward(BasicTape<T>& tape, ConvMixerBlock<T>& b,
                                       const BasicTensor<T>& x, ops::Mode mode) {
  const std::size_t channels = b.f2.depthwise.weight.dim(0);
  if (x.rank() != 3 || x.dim(1) != channels) {
    throw std::invalid_argument("convmixer_block_forward: input " + shape_string(x.shape()) +
                                " does not match block width " + std::to_string(channels));
  }
  const std::size_t batch = x.dim(0), frames = x.dim(2);
  // Frequency branch on the (C, T) map lifted to a depth axis.
  auto lifted = ops::reshape(tape, x, {batch, 1, channels, frames});
  auto z = ops::swish(tape, apply(tape, b.f1, ops::swish(tape, apply(tape, b.f_expand, lifted))));
  auto compressed = ops::reshape(tape, apply(tape, b.f_compress, z), {batch, channels, frames});
  auto y1 = ops::swish(tape, apply(tape, b.bn_freq, compressed, mode));
  // Temporal branch.
  auto y2 = ops::swish(tape, apply(tape, b.bn_temp, apply(tape, b.f2, y1), mode));
  auto mixed = b.mixer ? mixer_forward(tape, *b.mixer, y2) : y2;
  return ops::add(tape, ops::add(tape, x, y1), mixed);
}

template <typename T>
BasicTensor<T> forward(BasicTape<T>& tape, BasicConvMixerModel<T>& model,
                       const BasicTensor<T>& features, ops::Mode mode) {
  const auto& cfg = model.config;
  if (features.rank() != 3 || features.dim(1) != cfg.n_frames || features.dim(2) != cfg.n_mels) {
    throw std::invalid_argument("forward: expected features (B, " + std::to_string(cfg.n_frames) +
                                ", " + std::to_string(cfg.n_mels) + "), got " +
                                shape_string(features.shape()));
  }
  auto x = ops::transpose_ft(tape, features);  // (B, mels, T)
  x = apply(tape, model.pre, x, mode);
  for (auto& block : model.blocks) x = convmixer_block_forward(tape, block, x, mode);
  x = apply(tape, model.post, x, mode);
  return apply(tape, model.head, ops::mean_last(tape, x));
}

template <typename T>
std::size_t count_params(const BasicConvMixerModel<T>& model) {
  std::size_t n = 0;
  for (const auto& [name, t] : model.parameters()) n += t.size();
  return n;
}

std::uint64_t count_macs(const ModelConfig& cfg) {
  cfg.validate();
  using u64 = std::uint64_t;
  const u64 t = cfg.n_frames, mels = cfg.n_mels, c = cfg.channels, d = cfg.depth;
  const u64 k2 = cfg.kernel_block_2d_freq * cfg.kernel_block_2d_time;
  auto conv = [](u64 positions, u64 kernel, u64 in_per_group, u64 out) {
    return positions * kernel * in_per_group * out;
  };
  u64 macs = 0;
  macs += conv(t, cfg.kernel_pre, 1, mels) + conv(t, 1, mels, c);
  u64 block = 0;
  block += conv(c * t, k2, 1, d);                                 // f_expand
  block += conv(c * t, k2, 1, d) + conv(c * t, 1, d, d);          // f1
  block += conv(c * t, 1, d, 1);                                  // f_compress
  block += conv(t, cfg.kernel_block_1d, 1, c) + conv(t, 1, c, c); // f2
  if (cfg.mixer_enabled) {
    block += c * (t * cfg.mixer_hidden_t + cfg.mixer_hidden_t * t);
    block += t * (c * cfg.mixer_hidden_f + cfg.mixer_hidden_f * c);
  }
  macs += cfg.n_blocks * block;
  macs += conv(t, cfg.kernel_post, 1, c) + conv(t, 1, c, c);
  macs += c * cfg.n_classes;
  return macs;
}

template <typename T>
void copy_state(const BasicConvMixerModel<T>& src, BasicConvMixerModel<T>& dst) {
  auto s = src.state();
  auto d = dst.state();
  if (s.size() != d.size()) throw std::invalid_argument("copy_state: models differ in structure");
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i].first != d[i].first || s[i].second.shape() != d[i].second.shape()) {
      throw std::invalid_argument("copy_state: mismatch at " + s[i].first);
    }
    auto from = s[i].second.data();
    auto to = d[i].second.data();
    std::copy(from.begin(), from.end(), to.begin());
  }
}

template <typename U, typename T>
BasicConvMixerModel<U> cast_model(const BasicConvMixerModel<T>& model) {
  Rng rng(0);
  auto out = build_model<U>(model.config, rng);
  auto s = model.state();
  auto d = out.state();
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto from = s[i].second.data();
    auto to = d[i].second.data();
    for (std::size_t k = 0; k < from.size(); ++k) to[k] = static_cast<U>(from[k]);
  }
  return out;
}

#define KWS_INSTANTIATE_MODEL(T)                                                              \
  template struct BasicConvMixerModel<T>;                                                     \
  template MixerLayer<T> build_mixer<T>(std::size_t, std::size_t, std::size_t, std::size_t,   \
                                        Rng&);                                                \
  template ConvMixerBlock<T> build_block<T>(const ModelConfig&, Rng&);                        \
  template BasicConvMixerModel<T> build_model<T>(const ModelConfig&, Rng&);                   \
  template BasicTensor<T> mixer_forward(BasicTape<T>&, const MixerLayer<T>&,                  \
                                        const BasicTensor<T>&);                               \
  template BasicTensor<T> convmixer_block_forward(BasicTape<T>&, ConvMixerBlock<T>&,          \
                                                  const BasicTensor<T>&, ops::Mode);          \
  template BasicTensor<T> forward(BasicTape<T>&, BasicConvMixerModel<T>&,                     \
                                  const BasicTensor<T>&, ops::Mode);                          \
  template std::size_t count_params(const BasicConvMixerModel<T>&);                           \
  template void copy_state(const BasicConvMixerModel<T>&, BasicConvMixerModel<T>&);

KWS_INSTANTIATE_MODEL(float)
KWS_INSTANTIATE_MODEL(double)
#undef KWS_INSTANTIATE_MODEL

template BasicConvMixerModel<double> cast_model<double, float>(const BasicConvMixerModel<float>&);
template BasicConvMixerModel<float> cast_model<float, double>(const BasicConvMixerModel<double>&);
template BasicConvMixerModel<float> cast_model<float, float>(const BasicConvMixerModel<float>&);

}  // namespace kws
