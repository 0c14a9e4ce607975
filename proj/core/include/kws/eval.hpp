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

// Condition-matrix evaluation and report emission.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "kws/audio_io.hpp"
#include "kws/augment.hpp"
#include "kws/frontend.hpp"
#include "kws/model.hpp"

namespace kws {

inline constexpr std::size_t kNumEvalColumns = 5;

/// Report column names, in table order.
inline constexpr std::array<std::string_view, kNumEvalColumns> kEvalColumns = {"clean", "20dB", "0dB", "-5dB",
                                                                                "-10dB"};

/// clean: no noise, no reverberation. Every other column reverberates all
/// clips and adds noise at the column's SNR.
Condition eval_condition(std::size_t column);

/// Maps a (B, frames, mels) batch to (B, classes) logits.
using LogitsFn = std::function<Tensor(const Tensor&)>;

struct EvalData {
  const std::vector<ManifestEntry>& entries;
  const ClipLoader& loader;
  const NoiseBank& noises;
  const RirBank& rirs;
};

/// Row-major (n, classes) logits. Clip i draws its crop, noise and RIR from
/// stream (seed, evaluation, i), so the same clip sees the same draw in every
/// column and sharding never changes results.
std::vector<float> evaluate_logits(const LogitsFn& fn, const EvalData& data, const Condition& cond,
                                   std::uint64_t seed, const FrontendConfig& frontend = {});

/// Fraction of rows whose argmax equals the label (first maximum wins).
double top1_accuracy(const std::vector<float>& logits, std::size_t classes, const std::vector<int>& labels);

/// Top-1 accuracy; throws on an empty entry list.
double evaluate(const LogitsFn& fn, const EvalData& data, const Condition& cond, std::uint64_t seed,
                const FrontendConfig& frontend = {});

/// Inference-mode logits function for a model (BN uses running statistics).
LogitsFn model_logits(ConvMixerModel& model);

struct EvalResult {
  std::string model = "convmixer";
  std::map<std::string, double> accuracy;      // column -> [0, 1]
  std::map<std::string, std::size_t> n_samples;
  std::size_t params = 0;
  std::uint64_t macs = 0;

  /// Throws unless every column is present with accuracy in [0, 1].
  void validate() const;
};

/// Evaluates the test split under every column.
EvalResult evaluate_matrix(ConvMixerModel& model, const DatasetManifest& manifest, const NoiseBank& noises,
                           const RirBank& rirs, std::uint64_t seed, const FrontendConfig& frontend = {});

std::string report_csv(const std::vector<EvalResult>& results);
std::string report_table(const std::vector<EvalResult>& results);

/// Writes <base>.csv and <base>.txt.
void report(const std::vector<EvalResult>& results, const std::filesystem::path& base);

}  // namespace kws
