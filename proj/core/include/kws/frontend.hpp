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
#include <span>
#include <vector>

#include "kws/audio_io.hpp"
#include "kws/rng.hpp"

namespace kws {

inline constexpr std::size_t kNumFrames = 98;
inline constexpr std::size_t kNumMels = 64;

/// Log-Mel energies laid out (time, frequency), row = frame.
struct FeatureMatrix {
  std::size_t frames = kNumFrames;
  std::size_t bins = kNumMels;
  std::vector<float> values;

  FeatureMatrix() : values(kNumFrames * kNumMels, 0.0f) {}
  FeatureMatrix(std::size_t t, std::size_t f) : frames(t), bins(f), values(t * f, 0.0f) {}

  float& at(std::size_t t, std::size_t f) { return values[t * bins + f]; }
  float at(std::size_t t, std::size_t f) const { return values[t * bins + f]; }
};

struct FrontendConfig {
  int sample_rate = kSampleRate;
  double window_ms = 25.0;
  double hop_ms = 10.0;
  std::size_t n_mels = kNumMels;
  std::size_t n_fft = 512;
  double fmin = 0.0;
  double fmax = 8000.0;
  double log_floor = 1e-10;

  std::size_t window_samples() const;
  std::size_t hop_samples() const;
  /// Throws std::invalid_argument on an inconsistent configuration.
  void validate() const;
};

/// Row-major (n_mels, n_fft/2+1) triangular filters on the mel scale
/// mel(f) = 2595 log10(1 + f/700).
struct MelFilterbank {
  std::size_t n_mels = 0;
  std::size_t n_bins = 0;
  std::vector<float> weights;

  float at(std::size_t m, std::size_t k) const { return weights[m * n_bins + k]; }
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// The n_mels center frequencies (Hz), equally spaced in mel between fmin and fmax.
std::vector<double> mel_center_frequencies(const FrontendConfig& cfg);

MelFilterbank mel_filter_matrix(const FrontendConfig& cfg);

/// Right-pads with zeros or truncates to `target` samples.
Waveform pad_or_trim(const Waveform& wave, std::size_t target = kClipSamples);

/// Delays (shift > 0) or advances (shift < 0) by |shift| samples, keeping length.
Waveform shift_samples(const Waveform& wave, long shift);

/// Random shift in [-max_shift, max_shift] samples (default 100 ms).
Waveform time_shift(const Waveform& wave, Rng& rng, long max_shift = 1600);

/// |FFT|^2 of one Hann-windowed frame starting at frame*hop.
std::vector<float> frame_power_spectrum(std::span<const float> samples,
                                        std::size_t frame, const FrontendConfig& cfg);

/// 98x64 log-Mel filterbank of a 1 s waveform.
FeatureMatrix log_mel_fbank(const Waveform& wave, const FrontendConfig& cfg = {});

struct Mask {
  std::size_t start = 0;
  std::size_t width = 0;
};

/// Fills one time band and one frequency band with the pre-mask mean.
FeatureMatrix apply_masks(const FeatureMatrix& f, Mask time_mask, Mask freq_mask);

/// Widths uniform in {0..max_width}, offsets uniform over valid positions.
FeatureMatrix spec_augment(const FeatureMatrix& f, Rng& rng,
                           std::size_t max_time_width = 25,
                           std::size_t max_freq_width = 25);

/// Beta(alpha, alpha) draw.
double sample_beta(Rng& rng, double alpha);

struct MixupResult {
  FeatureMatrix features;
  std::vector<float> target;
  double lambda = 1.0;
};

/// lambda * (a, ya) + (1 - lambda) * (b, yb).
MixupResult mixup_with(const FeatureMatrix& a, const FeatureMatrix& b,
                       std::span<const float> ya, std::span<const float> yb,
                       double lambda);

/// mixup_with at lambda ~ Beta(alpha, alpha).
MixupResult mixup(const FeatureMatrix& a, const FeatureMatrix& b,
                  std::span<const float> ya, std::span<const float> yb, Rng& rng,
                  double alpha = 0.5);

}  // namespace kws
