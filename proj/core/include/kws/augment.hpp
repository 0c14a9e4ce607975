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
#include <optional>
#include <string>
#include <vector>

#include "kws/audio_io.hpp"
#include "kws/rng.hpp"

namespace kws {

/// Clean when snr_db is empty. Training stages only use {0, -5, -10} dB;
/// evaluation additionally uses 20 dB.
struct Condition {
  std::optional<int> snr_db;
  bool reverberant = false;

  static Condition clean() { return {}; }
  static Condition noisy(int snr, bool reverb = false) { return {snr, reverb}; }

  std::string name() const;
  bool operator==(const Condition&) const = default;
};

/// Uniformly weighted SNR conditions; reverberation is drawn independently
/// with probability rir_fraction.
struct ConditionSet {
  std::vector<Condition> conditions;
  double rir_fraction = 0.0;
};

inline constexpr int kNumStages = 5;

/// Stage 0 clean; stages 1-3 add 0, -5, -10 dB; stage 4 adds reverberation
/// to half the samples.
ConditionSet stage_conditions(int stage);

Condition sample_condition(const ConditionSet& set, Rng& rng);

/// Mean squared amplitude over the first `length` samples (all when 0).
double mean_power(const Waveform& wave, std::size_t length = 0);

struct MixResult {
  Waveform mixed;
  double gain = 0.0;  // applied to the noise
};

/// clean + g * noise with g = sqrt(P_clean / (P_noise * 10^(snr/10))).
/// P_clean is measured over the first `active_length` samples (whole clip
/// when 0) so right-padding does not dilute it. Output is not renormalized.
MixResult mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db,
                     std::size_t active_length = 0);

/// Linear convolution with the peak-normalized RIR, aligned to the RIR's
/// direct-path (global peak) index and truncated to the input length.
Waveform apply_rir(const Waveform& wave, const Waveform& rir);

/// Noise shorter than `length` is looped before a random crop.
Waveform noise_segment(const Waveform& noise, std::size_t length, Rng& rng);

struct ConditionedAudio {
  Waveform mixed;
  Waveform signal;  // clean component after optional reverberation
  Waveform noise;   // scaled noise component (zeros when clean)
};

/// Reverberation (uniformly chosen RIR) first, then additive noise (uniformly
/// chosen, randomly cropped clip) at the requested SNR.
ConditionedAudio apply_condition_traced(const Waveform& wave, const Condition& cond,
                                        const NoiseBank& noises, const RirBank& rirs, Rng& rng,
                                        std::size_t active_length = 0);

Waveform apply_condition(const Waveform& wave, const Condition& cond, const NoiseBank& noises,
                         const RirBank& rirs, Rng& rng, std::size_t active_length = 0);

}  // namespace kws
