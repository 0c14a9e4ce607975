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

#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <set>

#include "temp_dir.hpp"

namespace kws {
namespace {

using testing::TempDir;
using testing::write_text;

// Minimal PCM16 mono writer, independent of write_wav.
void raw_pcm16(const std::filesystem::path& p, const std::vector<std::int16_t>& s, std::uint32_t rate) {
  std::string b = "RIFF";
  auto u32 = [&](std::uint32_t v) { for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>(v >> (8 * i))); };
  auto u16 = [&](std::uint16_t v) { for (int i = 0; i < 2; ++i) b.push_back(static_cast<char>(v >> (8 * i))); };
  u32(36 + 2 * static_cast<std::uint32_t>(s.size()));
  b += "WAVEfmt ";
  u32(16), u16(1), u16(1), u32(rate), u32(rate * 2), u16(2), u16(16);
  b += "data";
  u32(2 * static_cast<std::uint32_t>(s.size()));
  for (auto v : s) u16(static_cast<std::uint16_t>(v));
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << b;
}

TEST(ReadWav, Pcm16Scaling) {
  TempDir dir;
  raw_pcm16(dir / "half.wav", std::vector<std::int16_t>(16000, 16384), 16000);
  const Waveform w = read_wav(dir / "half.wav");
  ASSERT_EQ(w.size(), 16000u);
  EXPECT_EQ(w.sample_rate, 16000);
  for (float s : w.samples) EXPECT_FLOAT_EQ(s, 0.5f);
}

TEST(ReadWav, SingleZeroSample) {
  TempDir dir;
  raw_pcm16(dir / "z.wav", {0}, 16000);
  const Waveform w = read_wav(dir / "z.wav");
  ASSERT_EQ(w.size(), 1u);
  EXPECT_EQ(w.samples[0], 0.0f);
}

TEST(ReadWav, RejectsOtherRates) {
  TempDir dir;
  raw_pcm16(dir / "8k.wav", {1, 2, 3}, 8000);
  try {
    read_wav(dir / "8k.wav");
    FAIL();
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find("unsupported sample rate"), std::string::npos) << e.what();
  }
}

TEST(ReadWav, RejectsGarbage) {
  TempDir dir;
  write_text(dir / "bad.wav", "not a wave file at all");
  EXPECT_THROW(read_wav(dir / "bad.wav"), std::runtime_error);
  EXPECT_THROW(read_wav(dir / "missing.wav"), std::runtime_error);
}

TEST(WriteWav, Pcm16RoundtripWithinQuantization) {
  TempDir dir;
  Waveform w{std::vector<float>(1000), kSampleRate};
  for (std::size_t i = 0; i < w.size(); ++i) w.samples[i] = std::sin(0.013f * static_cast<float>(i)) * 0.9f;
  write_wav(dir / "a.wav", w);
  const Waveform r = read_wav(dir / "a.wav");
  ASSERT_EQ(r.size(), w.size());
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_LE(std::abs(r.samples[i] - w.samples[i]), 1.0f / 32768.0f);
}

TEST(WriteWav, Float32RoundtripIsExact) {
  TempDir dir;
  Waveform w{{0.1f, -0.7f, 1.5f, 3e-9f}, kSampleRate};
  write_wav(dir / "f.wav", w, WavEncoding::kFloat32);
  EXPECT_EQ(read_wav(dir / "f.wav").samples, w.samples);
}

TEST(SampleSegment, Offsets) {
  Rng rng(1);
  Waveform w{std::vector<float>(16000), kSampleRate};
  for (std::size_t i = 0; i < w.size(); ++i) w.samples[i] = static_cast<float>(i);
  EXPECT_EQ(sample_segment(w, 16000, rng).samples, w.samples);
  w.samples.push_back(16000.0f);
  std::set<float> firsts;
  for (int i = 0; i < 200; ++i) firsts.insert(sample_segment(w, 16000, rng).samples[0]);
  EXPECT_EQ(firsts, (std::set<float>{0.0f, 1.0f}));
  EXPECT_THROW(sample_segment(Waveform{std::vector<float>(100), kSampleRate}, 16000, rng), std::invalid_argument);
}

class ManifestTest : public ::testing::Test {
 protected:
  TempDir dir;
  void clip(const std::string& rel, std::size_t n = 16000) {
    raw_pcm16(dir / rel, std::vector<std::int16_t>(n, 100), 16000);
  }
};

TEST_F(ManifestTest, TestListedCommandWord) {
  clip("yes/a.wav");
  write_text(dir / "validation_list.txt", "");
  write_text(dir / "testing_list.txt", "yes/a.wav\n");
  const auto m = build_manifest(dir.path());
  ASSERT_EQ(m.entries.size(), 1u);
  EXPECT_EQ(m.entries[0].split, Split::kTest);
  EXPECT_EQ(m.entries[0].label, 4);
}

TEST_F(ManifestTest, UnlistedOtherWordIsUnknownTrain) {
  clip("marvin/b.wav");
  write_text(dir / "validation_list.txt", "");
  write_text(dir / "testing_list.txt", "");
  const auto m = build_manifest(dir.path());
  ASSERT_EQ(m.entries.size(), 1u);
  EXPECT_EQ(m.entries[0].split, Split::kTrain);
  EXPECT_EQ(m.entries[0].label, kUnknownLabel);
}

TEST_F(ManifestTest, OverlappingSplitsRejected) {
  clip("up/a.wav");
  write_text(dir / "validation_list.txt", "up/a.wav\n");
  write_text(dir / "testing_list.txt", "up/a.wav\n");
  try {
    build_manifest(dir.path());
    FAIL();
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find("overlapping splits"), std::string::npos);
  }
}

TEST_F(ManifestTest, MissingListRejected) {
  clip("up/a.wav");
  write_text(dir / "validation_list.txt", "");
  EXPECT_THROW(build_manifest(dir.path()), std::runtime_error);
}

TEST_F(ManifestTest, SplitsPartitionFilesAndSilenceComesFromBackground) {
  for (int i = 0; i < 10; ++i) clip("up/u" + std::to_string(i) + ".wav");
  for (int i = 0; i < 6; ++i) clip("down/d" + std::to_string(i) + ".wav");
  for (int i = 0; i < 3; ++i) clip("cat/c" + std::to_string(i) + ".wav");
  clip("_background_noise_/noise.wav", 48000);
  write_text(dir / "validation_list.txt", "up/u0.wav\ndown/d0.wav\n");
  write_text(dir / "testing_list.txt", "up/u1.wav\ncat/c0.wav\n");
  const auto m = build_manifest(dir.path());
  std::size_t files = 0;
  std::set<std::string> seen;
  for (const auto& e : m.entries) {
    if (e.is_silence()) {
      EXPECT_EQ(e.label, kSilenceLabel);
      continue;
    }
    ++files;
    EXPECT_TRUE(seen.insert(e.path.string()).second) << "duplicate " << e.path;
  }
  EXPECT_EQ(files, 19u);
  EXPECT_EQ(m.split(Split::kValidation).size() + m.split(Split::kTest).size() + m.split(Split::kTrain).size(),
            m.entries.size());
  // Train: up 8, down 5 -> mean 6.5 per present command word -> 7 (rounded) silence entries.
  const auto hist = m.label_histogram(Split::kTrain);
  EXPECT_EQ(hist.size(), 12u);
  EXPECT_EQ(hist[0], 8u);
  EXPECT_EQ(hist[1], 5u);
  EXPECT_EQ(hist[kUnknownLabel], 2u);
  EXPECT_GT(hist[kSilenceLabel], 0u);
  EXPECT_EQ(m.label_names[kSilenceLabel], "silence");

  ClipLoader loader(m);
  Rng rng(3);
  for (const auto& e : m.entries) {
    if (!e.is_silence()) continue;
    const Waveform w = loader.load(e, rng);
    EXPECT_EQ(w.size(), kClipSamples);
  }
}

TEST(LoadBank, SortedByName) {
  TempDir dir;
  raw_pcm16(dir / "b.wav", {1}, 16000);
  raw_pcm16(dir / "a.wav", {2}, 16000);
  const auto bank = load_bank(dir.path());
  ASSERT_EQ(bank.size(), 2u);
  EXPECT_EQ(bank.names[0], "a.wav");
  EXPECT_EQ(bank.names[1], "b.wav");
}

}  // namespace
}  // namespace kws
