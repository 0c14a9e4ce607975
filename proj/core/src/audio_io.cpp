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

#include "kws/audio_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

namespace kws {
namespace fs = std::filesystem;
namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

[[noreturn]] void wav_error(const fs::path& path, const std::string& what) {
  throw std::runtime_error("read_wav: " + path.string() + ": " + what);
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::string to_generic(const fs::path& p) { return p.generic_string(); }

std::set<std::string> read_list(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("build_manifest: missing list file " + path.string());
  std::set<std::string> items;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) items.insert(line);
  }
  return items;
}

int label_for_word(const std::string& word) {
  for (int i = 0; i < kNumCommandWords; ++i) {
    if (kLabelNames[static_cast<std::size_t>(i)] == word) return i;
  }
  return kUnknownLabel;
}

std::vector<fs::path> sorted_wavs(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".wav") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

Waveform read_wav(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) wav_error(path, "cannot open");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    wav_error(path, "malformed header (not RIFF/WAVE)");
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t len = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (len < 16 || body + len > bytes.size()) wav_error(path, "malformed header (fmt chunk)");
      format = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      rate = read_u32(bytes.data() + body + 4);
      bits = read_u16(bytes.data() + body + 14);
      if (format == kFormatExtensible && len >= 26) {
        format = read_u16(bytes.data() + body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_len = std::min<std::size_t>(len, bytes.size() - body);
    }
    pos = body + len + (len & 1u);
  }
  if (!have_fmt || data == nullptr) wav_error(path, "malformed header (missing fmt or data)");
  if (channels == 0) wav_error(path, "malformed header (zero channels)");
  if (rate != static_cast<std::uint32_t>(kSampleRate)) {
    wav_error(path, "unsupported sample rate " + std::to_string(rate) +
                        " Hz (expected 16000)");
  }

  Waveform wave;
  wave.sample_rate = static_cast<int>(rate);
  if (format == kFormatPcm && bits == 16) {
    const std::size_t frame = 2u * channels;
    const std::size_t n = data_len / frame;
    wave.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto v = static_cast<std::int16_t>(read_u16(data + i * frame));
      wave.samples[i] = static_cast<float>(v) / 32768.0f;
    }
  } else if (format == kFormatFloat && bits == 32) {
    const std::size_t frame = 4u * channels;
    const std::size_t n = data_len / frame;
    wave.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t u = read_u32(data + i * frame);
      float f;
      std::memcpy(&f, &u, sizeof f);
      if (!std::isfinite(f)) wav_error(path, "non-finite sample");
      wave.samples[i] = f;
    }
  } else {
    wav_error(path, "unsupported encoding (format " + std::to_string(format) +
                        ", " + std::to_string(bits) + " bits)");
  }
  return wave;
}

void write_wav(const fs::path& path, const Waveform& wave, WavEncoding encoding) {
  const bool pcm = encoding == WavEncoding::kPcm16;
  const std::uint16_t bytes_per_sample = pcm ? 2 : 4;
  const auto data_len = static_cast<std::uint32_t>(wave.size() * bytes_per_sample);
  std::string out;
  out.reserve(44 + data_len);
  out += "RIFF";
  put_u32(out, 36 + data_len);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, pcm ? kFormatPcm : kFormatFloat);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(wave.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(wave.sample_rate) * bytes_per_sample);
  put_u16(out, bytes_per_sample);
  put_u16(out, static_cast<std::uint16_t>(8 * bytes_per_sample));
  out += "data";
  put_u32(out, data_len);
  for (float s : wave.samples) {
    if (pcm) {
      const long q = std::lround(std::clamp(s, -1.0f, 1.0f) * 32768.0f);
      put_u16(out, static_cast<std::uint16_t>(
                       static_cast<std::int16_t>(std::clamp(q, -32768L, 32767L))));
    } else {
      std::uint32_t u;
      std::memcpy(&u, &s, sizeof u);
      put_u32(out, u);
    }
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_wav: cannot open " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("write_wav: write failed for " + path.string());
}

Waveform sample_segment(const Waveform& wave, std::size_t length, Rng& rng) {
  if (wave.size() < length) {
    throw std::invalid_argument("sample_segment: clip of " + std::to_string(wave.size()) +
                                " samples is shorter than requested " +
                                std::to_string(length));
  }
  const auto offset = static_cast<std::size_t>(
      uniform_int(rng, 0, static_cast<long>(wave.size() - length)));
  Waveform out;
  out.sample_rate = wave.sample_rate;
  out.samples.assign(wave.samples.begin() + static_cast<std::ptrdiff_t>(offset),
                     wave.samples.begin() + static_cast<std::ptrdiff_t>(offset + length));
  return out;
}

std::string_view split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "validation";
    case Split::kTest: return "test";
  }
  return "?";
}

std::vector<ManifestEntry> DatasetManifest::split(Split which) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries) {
    if (e.split == which) out.push_back(e);
  }
  return out;
}

std::array<std::size_t, kNumClasses> DatasetManifest::label_histogram(Split which) const {
  std::array<std::size_t, kNumClasses> hist{};
  for (const auto& e : entries) {
    if (e.split == which) ++hist[static_cast<std::size_t>(e.label)];
  }
  return hist;
}

DatasetManifest build_manifest(const fs::path& root, const fs::path& validation_list,
                               const fs::path& testing_list) {
  const auto validation = read_list(validation_list);
  const auto testing = read_list(testing_list);
  for (const auto& item : validation) {
    if (testing.count(item)) {
      throw std::runtime_error("build_manifest: overlapping splits (" + item +
                               " listed for validation and test)");
    }
  }
  if (!fs::is_directory(root)) {
    throw std::runtime_error("build_manifest: not a directory: " + root.string());
  }

  DatasetManifest manifest;
  for (std::size_t i = 0; i < kNumClasses; ++i) manifest.label_names[i] = kLabelNames[i];

  std::vector<fs::path> words;
  for (const auto& e : fs::directory_iterator(root)) {
    if (!e.is_directory()) continue;
    const auto name = e.path().filename().string();
    if (name.empty() || name[0] == '_' || name[0] == '.') continue;
    words.push_back(e.path());
  }
  std::sort(words.begin(), words.end());

  for (const auto& dir : words) {
    const auto word = dir.filename().string();
    const auto files = sorted_wavs(dir);
    if (files.empty()) {
      throw std::runtime_error("build_manifest: word directory empty: " + dir.string());
    }
    const int label = label_for_word(word);
    for (const auto& f : files) {
      const auto rel = to_generic(fs::relative(f, root));
      ManifestEntry entry;
      entry.path = f;
      entry.label = label;
      entry.split = testing.count(rel)      ? Split::kTest
                    : validation.count(rel) ? Split::kValidation
                                            : Split::kTrain;
      manifest.entries.push_back(std::move(entry));
    }
  }

  const fs::path background = root / "_background_noise_";
  if (fs::is_directory(background)) manifest.background_files = sorted_wavs(background);
  if (!manifest.background_files.empty()) {
    for (Split split : {Split::kTrain, Split::kValidation, Split::kTest}) {
      const auto hist = manifest.label_histogram(split);
      std::size_t total = 0, words_present = 0;
      for (int w = 0; w < kNumCommandWords; ++w) {
        const auto n = hist[static_cast<std::size_t>(w)];
        total += n;
        if (n > 0) ++words_present;
      }
      if (words_present == 0) continue;
      const std::size_t count = (total + words_present / 2) / words_present;
      for (std::size_t k = 0; k < count; ++k) {
        ManifestEntry entry;
        entry.background_index = static_cast<int>(k % manifest.background_files.size());
        entry.path = manifest.background_files[static_cast<std::size_t>(entry.background_index)];
        entry.label = kSilenceLabel;
        entry.split = split;
        entry.crop_id = static_cast<int>(k);
        manifest.entries.push_back(std::move(entry));
      }
    }
  }
  return manifest;
}

DatasetManifest build_manifest(const fs::path& root) {
  return build_manifest(root, root / "validation_list.txt", root / "testing_list.txt");
}

ClipBank load_bank(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw std::runtime_error("load_bank: not a directory: " + dir.string());
  }
  ClipBank bank;
  for (const auto& f : sorted_wavs(dir)) {
    bank.clips.push_back(read_wav(f));
    bank.names.push_back(f.filename().string());
  }
  return bank;
}

ClipLoader::ClipLoader(const DatasetManifest& manifest) {
  background_.reserve(manifest.background_files.size());
  for (const auto& f : manifest.background_files) {
    Waveform w = read_wav(f);
    // Short background clips are looped up to one second.
    if (!w.samples.empty() && w.size() < kClipSamples) {
      std::vector<float> tiled;
      while (tiled.size() < kClipSamples) tiled.insert(tiled.end(), w.samples.begin(), w.samples.end());
      w.samples = std::move(tiled);
    }
    background_.push_back(std::move(w));
  }
}

Waveform ClipLoader::load(const ManifestEntry& entry, Rng& rng) const {
  if (!entry.is_silence()) return read_wav(entry.path);
  const auto idx = static_cast<std::size_t>(entry.background_index);
  if (idx >= background_.size()) {
    throw std::out_of_range("ClipLoader: background index out of range");
  }
  return sample_segment(background_[idx], kClipSamples, rng);
}

}  // namespace kws
