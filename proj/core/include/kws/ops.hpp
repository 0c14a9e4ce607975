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

// Differentiable primitives. Every op takes the tape first; when the tape is
// enabled and an input requires grad, the op records its vector-Jacobian
// product and the output requires grad.

#pragma once

#include <cstddef>

#include "kws/tensor.hpp"

namespace kws::ops {

enum class Mode { kTrain, kEval };

/// Convolution geometry. Stride is always 1 and padding is "same":
/// left/top padding (k-1)/2, the remainder on the right/bottom.
struct ConvSpec {
  int dims = 1;  // 1: x is (B, C, L); 2: x is (B, C, H, W)
  std::size_t groups = 1;
};

/// Cross-correlation. w is (Cout, Cin/groups, K) or (Cout, Cin/groups, KH, KW);
/// bias may be undefined.
template <typename T>
BasicTensor<T> conv(BasicTape<T>& tape, const BasicTensor<T>& x,
                    const BasicTensor<T>& w, const BasicTensor<T>& bias,
                    ConvSpec spec);

/// Running statistics of a batch norm layer; not trainable.
template <typename T>
struct BatchNormStats {
  BasicTensor<T> mean;
  BasicTensor<T> var;
  T momentum = T(0.1);
  T eps = T(1e-5);
};

/// Per-channel normalization over every axis except axis 1.
template <typename T>
BasicTensor<T> batch_norm(BasicTape<T>& tape, const BasicTensor<T>& x,
                          const BasicTensor<T>& gamma,
                          const BasicTensor<T>& beta, BatchNormStats<T>& stats,
                          Mode mode);

/// Normalizes each slice along the last axis (population variance).
template <typename T>
BasicTensor<T> layer_norm(BasicTape<T>& tape, const BasicTensor<T>& x,
                          const BasicTensor<T>& gamma,
                          const BasicTensor<T>& beta, T eps = T(1e-5));

/// y = x W^T + b along the last axis; W is (out, in).
template <typename T>
BasicTensor<T> linear(BasicTape<T>& tape, const BasicTensor<T>& x,
                      const BasicTensor<T>& w, const BasicTensor<T>& bias);

template <typename T>
BasicTensor<T> swish(BasicTape<T>& tape, const BasicTensor<T>& x);

/// Tanh approximation of GELU.
template <typename T>
BasicTensor<T> gelu(BasicTape<T>& tape, const BasicTensor<T>& x);

/// Swaps the last two axes.
template <typename T>
BasicTensor<T> transpose_ft(BasicTape<T>& tape, const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> reshape(BasicTape<T>& tape, const BasicTensor<T>& x,
                       Shape shape);

template <typename T>
BasicTensor<T> add(BasicTape<T>& tape, const BasicTensor<T>& a,
                   const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> mul(BasicTape<T>& tape, const BasicTensor<T>& a,
                   const BasicTensor<T>& b);

/// Sum of all entries; returns shape (1).
template <typename T>
BasicTensor<T> sum(BasicTape<T>& tape, const BasicTensor<T>& x);

/// Mean over the last axis.
template <typename T>
BasicTensor<T> mean_last(BasicTape<T>& tape, const BasicTensor<T>& x);

/// Mean binary cross-entropy over all B*K logits, stable log-sum-exp form.
template <typename T>
BasicTensor<T> bce_with_logits(BasicTape<T>& tape, const BasicTensor<T>& logits,
                               const BasicTensor<T>& targets);

}  // namespace kws::ops
