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

#include <complex>
#include <cstddef>
#include <vector>

namespace kws::detail {

/// Real-to-complex FFT of fixed size backed by FFTW. Plans are created once
/// per size under a lock; execution is thread-safe.
class RealFft {
 public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const { return n_; }
  std::size_t bins() const { return n_ / 2 + 1; }

  /// in: n reals; out: n/2+1 complex bins.
  void forward(const float* in, std::complex<float>* out) const;
  /// in: n/2+1 bins; out: n reals, unnormalized (scaled by n).
  void inverse(const std::complex<float>* in, float* out) const;

 private:
  std::size_t n_;
  void* forward_plan_;
  void* inverse_plan_;
};

const RealFft& real_fft(std::size_t n);

}  // namespace kws::detail
