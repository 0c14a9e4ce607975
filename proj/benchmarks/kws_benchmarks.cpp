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

#include <benchmark/benchmark.h>

#include <random>

#include "kws/augment.hpp"
#include "kws/frontend.hpp"
#include "kws/model.hpp"
#include "kws/ops.hpp"
#include "kws/trainer.hpp"

namespace kws {
namespace {

Tensor random(Shape s, std::uint64_t seed) {
  Tensor t(std::move(s));
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<float> u(-1, 1);
  for (float& v : t.data()) v = u(gen);
  return t;
}

Waveform tone_in_noise() {
  Waveform w{std::vector<float>(kClipSamples), kSampleRate};
  std::mt19937_64 gen(1);
  std::normal_distribution<float> n(0, 0.01f);
  for (std::size_t i = 0; i < w.size(); ++i) w.samples[i] = 0.3f * std::sin(0.2f * i) + n(gen);
  return w;
}

void BM_LogMelFbank(benchmark::State& st) {
  const Waveform w = tone_in_noise();
  for (auto _ : st) benchmark::DoNotOptimize(log_mel_fbank(w));
}
BENCHMARK(BM_LogMelFbank);

void BM_Reverberate(benchmark::State& st) {
  const Waveform w = tone_in_noise();
  RirBank rirs;
  Waveform rir{std::vector<float>(6400), kSampleRate};
  for (std::size_t i = 0; i < rir.size(); ++i) rir.samples[i] = std::exp(-0.001f * i) * ((i * 7919) % 13 - 6) / 6.0f;
  rirs.clips.push_back(rir);
  for (auto _ : st) {
    Rng rng(3);
    benchmark::DoNotOptimize(apply_condition(w, Condition::noisy(0, true), rirs, rirs, rng));
  }
}
BENCHMARK(BM_Reverberate);

// Depthwise 2-D conv at the block's working size; arg = depth.
void BM_DepthwiseConv2d(benchmark::State& st) {
  const std::size_t d = static_cast<std::size_t>(st.range(0));
  const Tensor x = random({8, d, 64, 98}, 1), w = random({d, 1, 5, 5}, 2), b = random({d}, 3);
  Tape tape(false);
  for (auto _ : st) benchmark::DoNotOptimize(ops::conv(tape, x, w, b, {2, d}));
}
BENCHMARK(BM_DepthwiseConv2d)->Arg(4)->Arg(12);

void BM_PointwiseConv1d(benchmark::State& st) {
  const Tensor x = random({8, 64, 98}, 1), w = random({64, 64, 1}, 2), b = random({64}, 3);
  Tape tape(false);
  for (auto _ : st) benchmark::DoNotOptimize(ops::conv(tape, x, w, b, {1, 1}));
}
BENCHMARK(BM_PointwiseConv1d);

// Whole-model inference and one training step; arg = batch size.
void BM_ForwardDefault(benchmark::State& st) {
  ConvMixerModel m = build_model(ModelConfig{}, 0);
  const Tensor x = random({static_cast<std::size_t>(st.range(0)), kNumFrames, kNumMels}, 4);
  for (auto _ : st) {
    Tape tape(false);
    benchmark::DoNotOptimize(forward(tape, m, x, ops::Mode::kEval));
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_ForwardDefault)->Arg(1)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_TrainStepDefault(benchmark::State& st) {
  ConvMixerModel m = build_model(ModelConfig{}, 0);
  const std::size_t b = static_cast<std::size_t>(st.range(0));
  const Tensor x = random({b, kNumFrames, kNumMels}, 4);
  Tensor y({b, std::size_t{kNumClasses}});
  for (std::size_t i = 0; i < b; ++i) y.data()[i * kNumClasses + i % kNumClasses] = 1.0f;
  const auto params = m.parameters();
  OptimizerState opt = make_optimizer_state(params);
  for (auto _ : st) {
    for (auto [n, p] : params) p.zero_grad();
    Tape tape;
    const Tensor loss = ops::bce_with_logits(tape, forward(tape, m, x, ops::Mode::kTrain), y);
    tape.backward(loss);
    adam_step(params, opt, 1e-3);
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_TrainStepDefault)->Arg(16)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace kws

BENCHMARK_MAIN();
