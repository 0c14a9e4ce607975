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

// Synthetic keyword corpus for desk-scale runs. Keywords are amplitude
// modulated harmonic tones, one fundamental per class; unknown words are
// chirps. Also writes a noise bank and exponential-decay room responses.

#pragma once

#include <cstdint>
#include <filesystem>

#include "kws/audio_io.hpp"

namespace kws {

struct SynthConfig {
  int n_classes = 4;        // command words 0..n_classes-1
  int per_class = 200;
  int n_unknown_words = 4;
  int unknown_per_word = 50;
  int n_noise = 5;
  int n_rir = 6;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Nominal fundamental of keyword class k. Jitter never brings adjacent
/// classes closer than a factor kMinClassRatio.
double class_fundamental(int k);
inline constexpr double kFundamentalStep = 1.4;
inline constexpr double kFundamentalJitter = 0.02;
inline constexpr double kMinClassRatio = 1.3;

/// One keyword clip (1 s) for class k drawn from rng.
Waveform synth_keyword(int k, Rng& rng);

/// Writes <out>/speech_commands (word directories, split lists and
/// _background_noise_), <out>/noise and <out>/rir. Same seed, same bytes.
void synth_dataset(const std::filesystem::path& out, const SynthConfig& cfg = {});

}  // namespace kws
