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

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kws/ops.hpp"
#include "kws/rng.hpp"
#include "kws/tensor.hpp"

namespace kws {

/// Architecture hyperparameters. The defaults land at ~112K parameters and
/// ~22.6M MACs per 1 s utterance.
struct ModelConfig {
  std::size_t n_mels = 64;    // input channels
  std::size_t n_frames = 98;  // time extent T
  std::size_t n_blocks = 3;
  std::size_t channels = 64;  // C
  std::size_t kernel_pre = 5;
  std::size_t kernel_block_1d = 9;
  std::size_t kernel_block_2d_freq = 5;
  std::size_t kernel_block_2d_time = 5;
  std::size_t depth = 12;  // extra axis created by f_expand
  std::size_t kernel_post = 9;
  std::size_t mixer_hidden_t = 98;
  std::size_t mixer_hidden_f = 64;
  bool mixer_enabled = true;
  std::size_t n_classes = 12;

  void validate() const;
};

template <typename T>
using Named = std::vector<std::pair<std::string, BasicTensor<T>>>;

template <typename T>
struct ConvLayer {
  BasicTensor<T> weight;
  BasicTensor<T> bias;
  ops::ConvSpec spec;
};

/// Depthwise (groups = channels) then pointwise (1x1) convolution.
template <typename T>
struct DwsConv {
  ConvLayer<T> depthwise;
  ConvLayer<T> pointwise;
};

template <typename T>
struct BatchNormLayer {
  BasicTensor<T> gamma;
  BasicTensor<T> beta;
  ops::BatchNormStats<T> stats;
};

template <typename T>
struct LayerNormLayer {
  BasicTensor<T> gamma;
  BasicTensor<T> beta;
};

template <typename T>
struct LinearLayer {
  BasicTensor<T> weight;  // (out, in)
  BasicTensor<T> bias;
};

/// 1-D DWS + BatchNorm + swish; used for the pre- and post-blocks.
template <typename T>
struct ConvBnBlock {
  DwsConv<T> dws;
  BatchNormLayer<T> bn;
};

/// Temporal mixing (w1, w2 shared across channels) followed by channel
/// mixing (w3, w4 shared across frames), each with a residual.
template <typename T>
struct MixerLayer {
  LayerNormLayer<T> norm_t;
  LinearLayer<T> w1;  // (hidden_t, T)
  LinearLayer<T> w2;  // (T, hidden_t)
  LayerNormLayer<T> norm_f;
  LinearLayer<T> w3;  // (hidden_f, C)
  LinearLayer<T> w4;  // (C, hidden_f)
};

template <typename T>
struct ConvMixerBlock {
  ConvLayer<T> f_expand;    // 2-D conv, 1 -> depth
  DwsConv<T> f1;            // 2-D DWS over (C, T) per depth slice
  ConvLayer<T> f_compress;  // pointwise, depth -> 1
  BatchNormLayer<T> bn_freq;
  DwsConv<T> f2;  // 1-D DWS over time
  BatchNormLayer<T> bn_temp;
  std::optional<MixerLayer<T>> mixer;
};

template <typename T>
struct BasicConvMixerModel {
  ModelConfig config;
  ConvBnBlock<T> pre;
  std::vector<ConvMixerBlock<T>> blocks;
  ConvBnBlock<T> post;
  LinearLayer<T> head;

  /// Trainable tensors in a fixed order with unique dotted names.
  Named<T> parameters() const;
  /// BatchNorm running statistics.
  Named<T> buffers() const;
  /// parameters() followed by buffers().
  Named<T> state() const;
};

using ConvMixerModel = BasicConvMixerModel<float>;

template <typename T>
ConvMixerBlock<T> build_block(const ModelConfig& cfg, Rng& rng);

template <typename T>
MixerLayer<T> build_mixer(std::size_t frames, std::size_t channels, std::size_t hidden_t,
                          std::size_t hidden_f, Rng& rng);

/// Deterministic given the generator state.
template <typename T>
BasicConvMixerModel<T> build_model(const ModelConfig& cfg, Rng& rng);

inline ConvMixerModel build_model(const ModelConfig& cfg, std::uint64_t seed) {
  Rng rng = make_stream(seed, StreamTag::kInit);
  return build_model<float>(cfg, rng);
}

/// x: (B, C, T) -> (B, C, T).
template <typename T>
BasicTensor<T> mixer_forward(BasicTape<T>& tape, const MixerLayer<T>& mixer,
                             const BasicTensor<T>& x);

/// x: (B, C, T) -> (B, C, T); x + y1 + mixer(y2).
template <typename T>
BasicTensor<T> convmixer_block_forward(BasicTape<T>& tape, ConvMixerBlock<T>& block,
                                       const BasicTensor<T>& x, ops::Mode mode);

/// features: (B, frames, mels) -> logits (B, n_classes).
template <typename T>
BasicTensor<T> forward(BasicTape<T>& tape, BasicConvMixerModel<T>& model,
                       const BasicTensor<T>& features, ops::Mode mode);

/// Deep copy into another scalar type.
template <typename U, typename T>
BasicConvMixerModel<U> cast_model(const BasicConvMixerModel<T>& model);

template <typename T>
std::size_t count_params(const BasicConvMixerModel<T>& model);

/// Multiply-accumulates of one forward pass over a (n_frames, n_mels) input.
std::uint64_t count_macs(const ModelConfig& cfg);

template <typename T>
std::uint64_t count_macs(const BasicConvMixerModel<T>& model) {
  return count_macs(model.config);
}

/// Copies values (not handles) of `src` into `dst`; shapes must agree.
template <typename T>
void copy_state(const BasicConvMixerModel<T>& src, BasicConvMixerModel<T>& dst);

}  // namespace kws
