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

#include <cstdint>
#include <initializer_list>
#include <random>

namespace kws {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Independent random stream keyed by (seed, keys...). Streams depend only on
/// their keys, never on scheduling, so per-sample work can run in any order.
inline Rng make_stream(std::uint64_t seed,
                       std::initializer_list<std::uint64_t> keys = {}) {
  std::uint64_t h = mix64(seed);
  for (std::uint64_t k : keys) h = mix64(h ^ mix64(k + 0x632be59bd9b4e019ULL));
  return Rng(h);
}

// Stream tags.
enum class StreamTag : std::uint64_t {
  kInit = 1,
  kTrainSample = 2,
  kTrainBatch = 3,
  kValidation = 4,
  kEvaluation = 5,
  kEpochOrder = 6,
  kSynth = 7,
};

inline Rng make_stream(std::uint64_t seed, StreamTag tag,
                       std::initializer_list<std::uint64_t> keys = {}) {
  std::uint64_t h = mix64(seed ^ mix64(static_cast<std::uint64_t>(tag)));
  for (std::uint64_t k : keys) h = mix64(h ^ mix64(k + 0x632be59bd9b4e019ULL));
  return Rng(h);
}

/// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [lo, hi] (inclusive).
inline long uniform_int(Rng& rng, long lo, long hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<long>(static_cast<std::uint64_t>(
                  uniform01(rng) * static_cast<double>(span)) %
                                span);
}

}  // namespace kws
