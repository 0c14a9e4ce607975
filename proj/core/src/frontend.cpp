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

#include "kws/frontend.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <stdexcept>
#include <string>

#include "fft.hpp"

namespace kws {

std::size_t FrontendConfig::window_samples() const {
  return static_cast<std::size_t>(std::lround(window_ms * sample_rate / 1000.0));
}

std::size_t FrontendConfig::hop_samples() const {
  return static_cast<std::size_t>(std::lround(hop_ms * sample_rate / 1000.0));
}

void FrontendConfig::validate() const {
  if (window_samples() == 0 || hop_samples() == 0) {
    throw std::invalid_argument("frontend: window and hop must be positive");
  }
  if (window_samples() > n_fft) {
    throw std::invalid_argument("frontend: n_fft " + std::to_string(n_fft) +
                                " smaller than window of " +
                                std::to_string(window_samples()) + " samples");
  }
  if (!(fmin >= 0.0 && fmin < fmax && fmax <= sample_rate / 2.0)) {
    throw std::invalid_argument("frontend: need 0 <= fmin < fmax <= Nyquist");
  }
  if (n_mels == 0) throw std::invalid_argument("frontend: n_mels must be positive");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {
std::vector<double> mel_edges(const FrontendConfig& cfg) {
  const double lo = hz_to_mel(cfg.fmin), hi = hz_to_mel(cfg.fmax);
  std::vector<double> edges(cfg.n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) /
                                  static_cast<double>(cfg.n_mels + 1));
  }
  return edges;
}

std::vector<float> hann(std::size_t n) {
  std::vector<float> w(n);
  const double pi = 3.14159265358979323846;
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = static_cast<float>(0.5 - 0.5 * std::cos(2.0 * pi * static_cast<double>(i) /
                                                   static_cast<double>(n)));
  }
  return w;
}
}  // namespace

std::vector<double> mel_center_frequencies(const FrontendConfig& cfg) {
  const auto edges = mel_edges(cfg);
  return {edges.begin() + 1, edges.end() - 1};
}

MelFilterbank mel_filter_matrix(const FrontendConfig& cfg) {
  cfg.validate();
  MelFilterbank fb;
  fb.n_mels = cfg.n_mels;
  fb.n_bins = cfg.n_fft / 2 + 1;
  fb.weights.assign(fb.n_mels * fb.n_bins, 0.0f);
  const auto edges = mel_edges(cfg);
  const double bin_hz = static_cast<double>(cfg.sample_rate) / static_cast<double>(cfg.n_fft);
  for (std::size_t m = 0; m < fb.n_mels; ++m) {
    const double l = edges[m], c = edges[m + 1], r = edges[m + 2];
    bool any = false;
    for (std::size_t k = 0; k < fb.n_bins; ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      const double w = std::max(0.0, std::min((f - l) / (c - l), (r - f) / (r - c)));
      fb.weights[m * fb.n_bins + k] = static_cast<float>(w);
      any = any || w > 0.0;
    }
    if (!any) {
      throw std::invalid_argument("mel_filter_matrix: n_mels " + std::to_string(cfg.n_mels) +
                                  " too large for n_fft " + std::to_string(cfg.n_fft) +
                                  " (filter " + std::to_string(m) + " is empty)");
    }
  }
  return fb;
}

Waveform pad_or_trim(const Waveform& wave, std::size_t target) {
  Waveform out;
  out.sample_rate = wave.sample_rate;
  out.samples.assign(target, 0.0f);
  std::copy_n(wave.samples.begin(), std::min(target, wave.size()), out.samples.begin());
  return out;
}

Waveform shift_samples(const Waveform& wave, long shift) {
  Waveform out;
  out.sample_rate = wave.sample_rate;
  const long n = static_cast<long>(wave.size());
  out.samples.assign(wave.size(), 0.0f);
  for (long i = 0; i < n; ++i) {
    const long src = i - shift;
    if (src >= 0 && src < n) out.samples[static_cast<std::size_t>(i)] =
        wave.samples[static_cast<std::size_t>(src)];
  }
  return out;
}

Waveform time_shift(const Waveform& wave, Rng& rng, long max_shift) {
  return shift_samples(wave, uniform_int(rng, -max_shift, max_shift));
}

std::vector<float> frame_power_spectrum(std::span<const float> samples, std::size_t frame,
                                        const FrontendConfig& cfg) {
  const std::size_t win = cfg.window_samples();
  const std::size_t start = frame * cfg.hop_samples();
  if (start + win > samples.size()) throw std::out_of_range("frame_power_spectrum: frame past end");
  static thread_local std::vector<float> window;
  static thread_local std::size_t window_len = 0;
  if (window_len != win) {
    window = hann(win);
    window_len = win;
  }
  const auto& fft = detail::real_fft(cfg.n_fft);
  std::vector<float> buf(cfg.n_fft, 0.0f);
  for (std::size_t i = 0; i < win; ++i) buf[i] = samples[start + i] * window[i];
  std::vector<std::complex<float>> spec(fft.bins());
  fft.forward(buf.data(), spec.data());
  std::vector<float> power(fft.bins());
  for (std::size_t k = 0; k < power.size(); ++k) power[k] = std::norm(spec[k]);
  return power;
}

FeatureMatrix log_mel_fbank(const Waveform& wave, const FrontendConfig& cfg) {
  cfg.validate();
  const std::size_t win = cfg.window_samples(), hop = cfg.hop_samples();
  if (wave.size() < win) throw std::invalid_argument("log_mel_fbank: waveform shorter than one window");
  const std::size_t frames = (wave.size() - win) / hop + 1;
  // Filterbanks are cached per thread keyed on the config fields they use.
  static thread_local MelFilterbank fb;
  static thread_local FrontendConfig fb_cfg{};
  static thread_local bool fb_ready = false;
  if (!fb_ready || fb_cfg.n_mels != cfg.n_mels || fb_cfg.n_fft != cfg.n_fft ||
      fb_cfg.fmin != cfg.fmin || fb_cfg.fmax != cfg.fmax || fb_cfg.sample_rate != cfg.sample_rate) {
    fb = mel_filter_matrix(cfg);
    fb_cfg = cfg;
    fb_ready = true;
  }

  FeatureMatrix out(frames, cfg.n_mels);
  for (std::size_t t = 0; t < frames; ++t) {
    const auto power = frame_power_spectrum(wave.samples, t, cfg);
    for (std::size_t m = 0; m < cfg.n_mels; ++m) {
      double e = 0.0;
      const float* w = fb.weights.data() + m * fb.n_bins;
      for (std::size_t k = 0; k < fb.n_bins; ++k) e += static_cast<double>(w[k]) * power[k];
      out.at(t, m) = static_cast<float>(std::log(e + cfg.log_floor));
    }
  }
  return out;
}

FeatureMatrix apply_masks(const FeatureMatrix& f, Mask time_mask, Mask freq_mask) {
  double sum = 0.0;
  for (float v : f.values) sum += v;
  const auto mean = static_cast<float>(sum / static_cast<double>(f.values.size()));
  FeatureMatrix out = f;
  const std::size_t t_end = std::min(f.frames, time_mask.start + time_mask.width);
  for (std::size_t t = time_mask.start; t < t_end; ++t)
    for (std::size_t b = 0; b < f.bins; ++b) out.at(t, b) = mean;
  const std::size_t f_end = std::min(f.bins, freq_mask.start + freq_mask.width);
  for (std::size_t t = 0; t < f.frames; ++t)
    for (std::size_t b = freq_mask.start; b < f_end; ++b) out.at(t, b) = mean;
  return out;
}

FeatureMatrix spec_augment(const FeatureMatrix& f, Rng& rng, std::size_t max_time_width,
                           std::size_t max_freq_width) {
  Mask tm, fm;
  tm.width = static_cast<std::size_t>(
      uniform_int(rng, 0, static_cast<long>(std::min(max_time_width, f.frames))));
  tm.start = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<long>(f.frames - tm.width)));
  fm.width = static_cast<std::size_t>(
      uniform_int(rng, 0, static_cast<long>(std::min(max_freq_width, f.bins))));
  fm.start = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<long>(f.bins - fm.width)));
  return apply_masks(f, tm, fm);
}

double sample_beta(Rng& rng, double alpha) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  for (;;) {
    const double x = gamma(rng), y = gamma(rng);
    if (x + y > 0.0) return x / (x + y);
  }
}

MixupResult mixup_with(const FeatureMatrix& a, const FeatureMatrix& b, std::span<const float> ya,
                       std::span<const float> yb, double lambda) {
  if (a.frames != b.frames || a.bins != b.bins || ya.size() != yb.size()) {
    throw std::invalid_argument("mixup: shape mismatch");
  }
  MixupResult out;
  out.lambda = lambda;
  out.features = FeatureMatrix(a.frames, a.bins);
  const auto l = static_cast<float>(lambda), r = static_cast<float>(1.0 - lambda);
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    out.features.values[i] = l * a.values[i] + r * b.values[i];
  }
  out.target.resize(ya.size());
  for (std::size_t i = 0; i < ya.size(); ++i) out.target[i] = l * ya[i] + r * yb[i];
  return out;
}

MixupResult mixup(const FeatureMatrix& a, const FeatureMatrix& b, std::span<const float> ya,
                  std::span<const float> yb, Rng& rng, double alpha) {
  return mixup_with(a, b, ya, yb, sample_beta(rng, alpha));
}

}  // namespace kws
