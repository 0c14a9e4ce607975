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

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "kws/rng.hpp"

namespace kws {

inline constexpr int kSampleRate = 16000;
inline constexpr std::size_t kClipSamples = 16000;
inline constexpr int kNumClasses = 12;
inline constexpr int kSilenceLabel = 10;
inline constexpr int kUnknownLabel = 11;
inline constexpr int kNumCommandWords = 10;

inline constexpr std::array<std::string_view, kNumClasses> kLabelNames = {
    "up", "down", "left", "right", "yes", "no",
    "on", "off", "go", "stop", "silence", "unknown"};

/// Mono audio at kSampleRate, nominal range [-1, 1].
struct Waveform {
  std::vector<float> samples;
  int sample_rate = kSampleRate;

  std::size_t size() const { return samples.size(); }
};

enum class WavEncoding { kPcm16, kFloat32 };

/// Reads a RIFF/WAVE file (PCM16 or IEEE float32). Multi-channel input keeps
/// the first channel. Anything but 16 kHz is rejected.
Waveform read_wav(const std::filesystem::path& path);

void write_wav(const std::filesystem::path& path, const Waveform& wave,
               WavEncoding encoding = WavEncoding::kPcm16);

/// Uniformly placed contiguous crop of exactly `length` samples.
Waveform sample_segment(const Waveform& wave, std::size_t length, Rng& rng);

enum class Split { kTrain, kValidation, kTest };
std::string_view split_name(Split split);

struct ManifestEntry {
  std::filesystem::path path;
  int label = kUnknownLabel;
  Split split = Split::kTrain;
  /// Silence entries crop 1 s of background_files[background_index]; -1 for
  /// ordinary clips.
  int background_index = -1;
  /// Distinguishes silence entries that share a background file.
  int crop_id = 0;

  bool is_silence() const { return background_index >= 0; }
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::array<std::string, kNumClasses> label_names;
  std::vector<std::filesystem::path> background_files;

  std::vector<ManifestEntry> split(Split which) const;
  std::array<std::size_t, kNumClasses> label_histogram(Split which) const;
};

/// Scans `root` for <word>/<clip>.wav. Clips named in the testing list go to
/// the test split, those in the validation list to validation, the rest to
/// train. The ten command words keep their label index; every other word is
/// `unknown`. Directories starting with '_' are not words; WAVs under
/// `_background_noise_` back the synthesized `silence` entries, one split's
/// silence count being the mean per-command-word count of that split.
DatasetManifest build_manifest(const std::filesystem::path& root,
                               const std::filesystem::path& validation_list,
                               const std::filesystem::path& testing_list);

/// Uses root/validation_list.txt and root/testing_list.txt.
DatasetManifest build_manifest(const std::filesystem::path& root);

/// Waveforms loaded from a flat directory of WAVs, in filename order.
struct ClipBank {
  std::vector<Waveform> clips;
  std::vector<std::string> names;

  bool empty() const { return clips.empty(); }
  std::size_t size() const { return clips.size(); }
};
using NoiseBank = ClipBank;
using RirBank = ClipBank;

ClipBank load_bank(const std::filesystem::path& dir);

/// Loads manifest clips; silence entries are cropped from preloaded
/// background clips using `rng`.
class ClipLoader {
 public:
  explicit ClipLoader(const DatasetManifest& manifest);

  Waveform load(const ManifestEntry& entry, Rng& rng) const;

 private:
  std::vector<Waveform> background_;
};

}  // namespace kws
