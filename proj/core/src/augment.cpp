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

#include "kws/augment.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

#include "fft.hpp"

namespace kws {

std::string Condition::name() const {
  std::string s = snr_db ? std::to_string(*snr_db) + "dB" : "clean";
  if (reverberant) s += "+rir";
  return s;
}

ConditionSet stage_conditions(int stage) {
  if (stage < 0 || stage >= kNumStages) {
    throw std::out_of_range("stage_conditions: stage " + std::to_string(stage) +
                            " outside [0, 4]");
  }
  ConditionSet set;
  set.conditions.push_back(Condition::clean());
  const int levels[] = {0, -5, -10};
  for (int i = 0; i < std::min(stage, 3); ++i) set.conditions.push_back(Condition::noisy(levels[i]));
  set.rir_fraction = stage == 4 ? 0.5 : 0.0;
  return set;
}

Condition sample_condition(const ConditionSet& set, Rng& rng) {
  if (set.conditions.empty()) throw std::invalid_argument("sample_condition: empty set");
  Condition c = set.conditions[static_cast<std::size_t>(
      uniform_int(rng, 0, static_cast<long>(set.conditions.size()) - 1))];
  c.reverberant = uniform01(rng) < set.rir_fraction;
  return c;
}

double mean_power(const Waveform& wave, std::size_t length) {
  const std::size_t n = length == 0 ? wave.size() : std::min(length, wave.size());
  if (n == 0) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(wave.samples[i]) * wave.samples[i];
  return acc / static_cast<double>(n);
}

MixResult mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db,
                     std::size_t active_length) {
  if (clean.size() != noise.size()) {
    throw std::invalid_argument("mix_at_snr: length mismatch (" + std::to_string(clean.size()) +
                                " vs " + std::to_string(noise.size()) + ")");
  }
  const double pc = mean_power(clean, active_length);
  const double pn = mean_power(noise);
  if (!(pc > 0.0)) throw std::domain_error("mix_at_snr: clean signal has zero power");
  if (!(pn > 0.0)) throw std::domain_error("mix_at_snr: noise has zero power");
  MixResult out;
  out.gain = std::sqrt(pc / (pn * std::pow(10.0, snr_db / 10.0)));
  out.mixed = clean;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    out.mixed.samples[i] = static_cast<float>(clean.samples[i] + out.gain * noise.samples[i]);
  }
  return out;
}

Waveform apply_rir(const Waveform& wave, const Waveform& rir) {
  if (rir.samples.empty()) throw std::invalid_argument("apply_rir: empty rir");
  std::size_t peak = 0;
  float peak_abs = 0.0f;
  for (std::size_t i = 0; i < rir.size(); ++i) {
    if (std::abs(rir.samples[i]) > peak_abs) {
      peak_abs = std::abs(rir.samples[i]);
      peak = i;
    }
  }
  if (peak_abs == 0.0f) throw std::invalid_argument("apply_rir: all-zero rir");

  const std::size_t n = wave.size(), taps = rir.size();
  std::vector<float> h(taps);
  for (std::size_t i = 0; i < taps; ++i) h[i] = rir.samples[i] / peak_abs;

  Waveform out;
  out.sample_rate = wave.sample_rate;
  out.samples.assign(n, 0.0f);
  if (n == 0) return out;

  if (taps <= 64) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t full = i + peak;  // index into the full convolution
      double acc = 0.0;
      const std::size_t k_lo = full >= n ? full - n + 1 : 0;
      const std::size_t k_hi = std::min(taps - 1, full);
      for (std::size_t k = k_lo; k <= k_hi; ++k) acc += static_cast<double>(h[k]) * wave.samples[full - k];
      out.samples[i] = static_cast<float>(acc);
    }
    return out;
  }

  std::size_t size = 1;
  while (size < n + taps - 1) size <<= 1;
  const auto& fft = detail::real_fft(size);
  std::vector<float> a(size, 0.0f), b(size, 0.0f), y(size);
  std::copy(wave.samples.begin(), wave.samples.end(), a.begin());
  std::copy(h.begin(), h.end(), b.begin());
  std::vector<std::complex<float>> fa(fft.bins()), fb(fft.bins());
  fft.forward(a.data(), fa.data());
  fft.forward(b.data(), fb.data());
  for (std::size_t k = 0; k < fa.size(); ++k) fa[k] *= fb[k];
  fft.inverse(fa.data(), y.data());
  const float scale = 1.0f / static_cast<float>(size);
  for (std::size_t i = 0; i < n; ++i) out.samples[i] = y[i + peak] * scale;
  return out;
}

Waveform noise_segment(const Waveform& noise, std::size_t length, Rng& rng) {
  if (noise.samples.empty()) throw std::invalid_argument("noise_segment: empty noise clip");
  if (noise.size() >= length) return sample_segment(noise, length, rng);
  Waveform tiled;
  tiled.sample_rate = noise.sample_rate;
  while (tiled.size() < length) {
    tiled.samples.insert(tiled.samples.end(), noise.samples.begin(), noise.samples.end());
  }
  return sample_segment(tiled, length, rng);
}

ConditionedAudio apply_condition_traced(const Waveform& wave, const Condition& cond,
                                        const NoiseBank& noises, const RirBank& rirs, Rng& rng,
                                        std::size_t active_length) {
  ConditionedAudio out;
  out.signal = wave;
  if (cond.reverberant) {
    if (rirs.empty()) throw std::invalid_argument("apply_condition: reverberant condition needs a RIR bank");
    const auto& rir = rirs.clips[static_cast<std::size_t>(
        uniform_int(rng, 0, static_cast<long>(rirs.size()) - 1))];
    out.signal = apply_rir(out.signal, rir);
  }
  out.noise.sample_rate = wave.sample_rate;
  out.noise.samples.assign(wave.size(), 0.0f);
  if (cond.snr_db) {
    if (noises.empty()) throw std::invalid_argument("apply_condition: noisy condition needs a noise bank");
    const auto& clip = noises.clips[static_cast<std::size_t>(
        uniform_int(rng, 0, static_cast<long>(noises.size()) - 1))];
    const Waveform seg = noise_segment(clip, wave.size(), rng);
    const MixResult mix = mix_at_snr(out.signal, seg, *cond.snr_db, active_length);
    for (std::size_t i = 0; i < seg.size(); ++i) {
      out.noise.samples[i] = static_cast<float>(mix.gain * seg.samples[i]);
    }
    out.mixed = mix.mixed;
  } else {
    out.mixed = out.signal;
  }
  return out;
}

Waveform apply_condition(const Waveform& wave, const Condition& cond, const NoiseBank& noises,
                         const RirBank& rirs, Rng& rng, std::size_t active_length) {
  return apply_condition_traced(wave, cond, noises, rirs, rng, active_length).mixed;
}

}  // namespace kws
