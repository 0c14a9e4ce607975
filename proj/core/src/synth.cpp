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

#include "kws/synth.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace kws {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr std::array<std::string_view, 8> kUnknownWords = {"bed", "bird", "cat", "dog", "happy", "house", "tree", "wow"};

// Tags for synthesis streams.
enum : std::uint64_t { kKeyword = 1, kUnknown, kBackground, kNoise, kRir };

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

double gaussian(Rng& rng) {
  // Box-Muller keeps the draw identical across standard libraries.
  const double u1 = 1.0 - uniform01(rng), u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

// Raised-cosine attack/release over an event [start, start + len).
double envelope(std::size_t i, std::size_t start, std::size_t len) {
  constexpr double kRamp = 480.0;  // 30 ms
  if (i < start || i >= start + len) return 0.0;
  const double t = static_cast<double>(i - start);
  const double rest = static_cast<double>(start + len - i);
  const double ramp = std::min({1.0, t / kRamp, rest / kRamp});
  return 0.5 - 0.5 * std::cos(std::numbers::pi * ramp);
}

struct Event {
  std::size_t start, len;
  double amp;
};

Event draw_event(Rng& rng) {
  const auto len = static_cast<std::size_t>(uniform(rng, 0.45, 0.75) * kSampleRate);
  const auto start = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(kClipSamples - len));
  return {start, len, uniform(rng, 0.1, 0.5)};
}

void add_floor(Waveform& w, Rng& rng) {
  for (auto& s : w.samples) s += static_cast<float>(1e-3 * gaussian(rng));
}

Waveform synth_unknown(Rng& rng) {
  Waveform w{std::vector<float>(kClipSamples, 0.0f), kSampleRate};
  const Event ev = draw_event(rng);
  const double fa = uniform(rng, 250.0, 1000.0), fb = uniform(rng, 250.0, 1000.0);
  double phase = uniform(rng, 0.0, kTwoPi);
  for (std::size_t i = ev.start; i < ev.start + ev.len; ++i) {
    const double frac = static_cast<double>(i - ev.start) / static_cast<double>(ev.len);
    phase += kTwoPi * (fa + (fb - fa) * frac) / kSampleRate;
    const double v = std::sin(phase) + 0.4 * std::sin(2.0 * phase) + 0.2 * std::sin(3.0 * phase);
    w.samples[i] = static_cast<float>(ev.amp * envelope(i, ev.start, ev.len) * v / 1.6);
  }
  add_floor(w, rng);
  return w;
}

std::vector<float> white(Rng& rng, std::size_t n) {
  std::vector<float> v(n);
  for (auto& s : v) s = static_cast<float>(gaussian(rng));
  return v;
}

// Paul Kellet's economy pink filter.
std::vector<float> pink(Rng& rng, std::size_t n) {
  std::vector<float> v(n);
  double b0 = 0, b1 = 0, b2 = 0;
  for (auto& s : v) {
    const double x = gaussian(rng);
    b0 = 0.99765 * b0 + x * 0.0990460;
    b1 = 0.96300 * b1 + x * 0.2965164;
    b2 = 0.57000 * b2 + x * 1.0526913;
    s = static_cast<float>(b0 + b1 + b2 + x * 0.1848);
  }
  return v;
}

std::vector<float> brown(Rng& rng, std::size_t n) {
  std::vector<float> v(n);
  double acc = 0.0;
  for (auto& s : v) {
    acc = 0.995 * acc + 0.1 * gaussian(rng);
    s = static_cast<float>(acc);
  }
  return v;
}

// Dual tones hopping every 150 ms over the telephone keypad grid.
std::vector<float> dtmf(Rng& rng, std::size_t n) {
  static constexpr double kLow[] = {697, 770, 852, 941};
  static constexpr double kHigh[] = {1209, 1336, 1477, 1633};
  std::vector<float> v(n);
  double lo = 0, hi = 0, p1 = 0, p2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i % 2400 == 0) {
      lo = kLow[uniform_int(rng, 0, 3)];
      hi = kHigh[uniform_int(rng, 0, 3)];
    }
    p1 += kTwoPi * lo / kSampleRate;
    p2 += kTwoPi * hi / kSampleRate;
    v[i] = static_cast<float>(std::sin(p1) + std::sin(p2) + 0.3 * gaussian(rng));
  }
  return v;
}

// Overlapping harmonic stacks with wandering pitch: keyword-like clutter.
std::vector<float> babble(Rng& rng, std::size_t n) {
  std::vector<float> v(n, 0.0f);
  for (int talker = 0; talker < 3; ++talker) {
    double phase = 0.0, f0 = uniform(rng, 200.0, 900.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (i % 3200 == 0) f0 = uniform(rng, 200.0, 900.0);
      phase += kTwoPi * f0 / kSampleRate;
      const double am = 0.6 + 0.4 * std::sin(kTwoPi * 4.0 * static_cast<double>(i) / kSampleRate + talker);
      v[i] += static_cast<float>(am * (std::sin(phase) + 0.5 * std::sin(2.0 * phase)));
    }
  }
  for (std::size_t i = 0; i < n; ++i) v[i] += static_cast<float>(0.2 * gaussian(rng));
  return v;
}

Waveform normalized(std::vector<float> v, double peak) {
  double m = 0.0;
  for (float s : v) m = std::max(m, static_cast<double>(std::fabs(s)));
  if (m > 0.0) {
    for (auto& s : v) s = static_cast<float>(s * peak / m);
  }
  return {std::move(v), kSampleRate};
}

Waveform synth_rir(Rng& rng) {
  const std::size_t n = kSampleRate * 2 / 5;  // 0.4 s
  const double t60 = uniform(rng, 0.15, 0.6);
  const auto delay = static_cast<std::size_t>(uniform_int(rng, 0, 40));
  std::vector<float> h(n, 0.0f);
  h[delay] = 1.0f;
  for (int r = 0; r < 4; ++r) {
    const auto at = delay + static_cast<std::size_t>(uniform_int(rng, 40, 800));
    h[at] += static_cast<float>(uniform(rng, -0.6, 0.6));
  }
  for (std::size_t i = delay + 1; i < n; ++i) {
    const double t = static_cast<double>(i - delay) / kSampleRate;
    h[i] += static_cast<float>(0.25 * gaussian(rng) * std::exp(-6.9 * t / t60));
  }
  return {std::move(h), kSampleRate};
}

std::string clip_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "clip%04d_nohash_0.wav", i);
  return buf;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_classes < 2 || n_classes > kNumCommandWords) throw std::invalid_argument("synth: n_classes must be in [2, 10]");
  if (per_class < 10) throw std::invalid_argument("synth: per_class must be >= 10");
  if (n_unknown_words < 1 || n_unknown_words > static_cast<int>(kUnknownWords.size())) {
    throw std::invalid_argument("synth: n_unknown_words must be in [1, 8]");
  }
  if (unknown_per_word < 10) throw std::invalid_argument("synth: unknown_per_word must be >= 10");
  if (n_noise < 1 || n_rir < 1) throw std::invalid_argument("synth: need at least one noise and one RIR");
}

double class_fundamental(int k) { return 300.0 * std::pow(kFundamentalStep, k); }

Waveform synth_keyword(int k, Rng& rng) {
  Waveform w{std::vector<float>(kClipSamples, 0.0f), kSampleRate};
  const Event ev = draw_event(rng);
  const double f0 = class_fundamental(k) * uniform(rng, 1.0 - kFundamentalJitter, 1.0 + kFundamentalJitter);
  const double am_rate = uniform(rng, 3.0, 7.0);
  const double am_phase = uniform(rng, 0.0, kTwoPi);
  const double phase0 = uniform(rng, 0.0, kTwoPi);
  static constexpr double kHarmonics[] = {1.0, 0.5, 0.3, 0.2};
  for (std::size_t i = ev.start; i < ev.start + ev.len; ++i) {
    const double t = static_cast<double>(i) / kSampleRate;
    double v = 0.0;
    for (int h = 0; h < 4; ++h) v += kHarmonics[h] * std::sin((h + 1) * (kTwoPi * f0 * t + phase0));
    const double am = 1.0 + 0.5 * std::sin(kTwoPi * am_rate * t + am_phase);
    w.samples[i] = static_cast<float>(ev.amp * envelope(i, ev.start, ev.len) * am * v / 3.0);
  }
  add_floor(w, rng);
  return w;
}

void synth_dataset(const std::filesystem::path& out, const SynthConfig& cfg) {
  cfg.validate();
  namespace fs = std::filesystem;
  const fs::path root = out / "speech_commands";
  std::error_code ec;
  fs::create_directories(root / "_background_noise_", ec);
  fs::create_directories(out / "noise", ec);
  fs::create_directories(out / "rir", ec);
  if (ec) throw std::runtime_error("synth: cannot create " + out.string() + ": " + ec.message());

  std::string val_list, test_list;
  auto assign = [&](const std::string& rel, int i) {
    if (i % 10 == 0) test_list += rel + "\n";
    else if (i % 10 == 1) val_list += rel + "\n";
  };
  for (int k = 0; k < cfg.n_classes; ++k) {
    const std::string word(kLabelNames[static_cast<std::size_t>(k)]);
    fs::create_directories(root / word);
    for (int i = 0; i < cfg.per_class; ++i) {
      Rng rng = make_stream(cfg.seed, StreamTag::kSynth, {kKeyword, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(i)});
      write_wav(root / word / clip_name(i), synth_keyword(k, rng));
      assign(word + "/" + clip_name(i), i);
    }
  }
  for (int u = 0; u < cfg.n_unknown_words; ++u) {
    const std::string word(kUnknownWords[static_cast<std::size_t>(u)]);
    fs::create_directories(root / word);
    for (int i = 0; i < cfg.unknown_per_word; ++i) {
      Rng rng = make_stream(cfg.seed, StreamTag::kSynth, {kUnknown, static_cast<std::uint64_t>(u), static_cast<std::uint64_t>(i)});
      write_wav(root / word / clip_name(i), synth_unknown(rng));
      assign(word + "/" + clip_name(i), i);
    }
  }
  using Gen = std::vector<float> (*)(Rng&, std::size_t);
  const std::array<std::pair<const char*, Gen>, 3> backgrounds = {
      {{"white_noise", white}, {"pink_noise", pink}, {"brown_noise", brown}}};
  for (std::size_t b = 0; b < backgrounds.size(); ++b) {
    Rng rng = make_stream(cfg.seed, StreamTag::kSynth, {kBackground, b});
    write_wav(root / "_background_noise_" / (std::string(backgrounds[b].first) + ".wav"),
              normalized(backgrounds[b].second(rng, 5 * kSampleRate), 0.05));
  }
  const std::array<std::pair<const char*, Gen>, 5> noises = {
      {{"white", white}, {"pink", pink}, {"brown", brown}, {"dtmf", dtmf}, {"babble", babble}}};
  for (int j = 0; j < cfg.n_noise; ++j) {
    const auto& [name, gen] = noises[static_cast<std::size_t>(j) % noises.size()];
    Rng rng = make_stream(cfg.seed, StreamTag::kSynth, {kNoise, static_cast<std::uint64_t>(j)});
    char file[64];
    std::snprintf(file, sizeof file, "%02d_%s.wav", j, name);
    write_wav(out / "noise" / file, normalized(gen(rng, 4 * kSampleRate), 0.5));
  }
  for (int j = 0; j < cfg.n_rir; ++j) {
    Rng rng = make_stream(cfg.seed, StreamTag::kSynth, {kRir, static_cast<std::uint64_t>(j)});
    char file[32];
    std::snprintf(file, sizeof file, "rir%02d.wav", j);
    write_wav(out / "rir" / file, synth_rir(rng), WavEncoding::kFloat32);
  }
  auto write_text = [](const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!(f << text)) throw std::runtime_error("synth: cannot write " + path.string());
  };
  write_text(root / "validation_list.txt", val_list);
  write_text(root / "testing_list.txt", test_list);
}

}  // namespace kws
