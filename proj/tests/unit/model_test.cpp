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

#include "kws/model.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

#include "kws/gradcheck.hpp"
#include "oracles.hpp"

namespace kws {
namespace {

using D = BasicTensor<double>;
using DTape = BasicTape<double>;

TEST(Counters, MatchHandLedgers) {
  for (const auto& c : oracle::ledger_cases()) {
    const ConvMixerModel m = build_model(c.cfg, 0);
    EXPECT_EQ(count_params(m), c.params) << c.name;
    EXPECT_EQ(count_macs(c.cfg), c.macs) << c.name;
  }
}

TEST(Counters, DefaultConfigWithinBudget) {
  const ModelConfig cfg;
  const ConvMixerModel m = build_model(cfg, 0);
  EXPECT_GE(count_params(m), 100000u);
  EXPECT_LE(count_params(m), 140000u);
  EXPECT_GE(count_macs(cfg), 18000000u);
  EXPECT_LE(count_macs(cfg), 27000000u);
}

TEST(Model, ParameterNamesUnique) {
  const ConvMixerModel m = build_model(ModelConfig{}, 1);
  std::set<std::string> names;
  for (const auto& [n, t] : m.state()) EXPECT_TRUE(names.insert(n).second) << n;
  for (const auto& [n, t] : m.parameters()) EXPECT_TRUE(t.requires_grad()) << n;
  for (const auto& [n, t] : m.buffers()) EXPECT_FALSE(t.requires_grad()) << n;
}

TEST(Model, DisablingMixerRemovesOnlyMixerGroup) {
  ModelConfig on;
  ModelConfig off = on;
  off.mixer_enabled = false;
  std::set<std::string> a, b;
  for (const auto& [n, t] : build_model(on, 0).parameters()) a.insert(n);
  for (const auto& [n, t] : build_model(off, 0).parameters()) b.insert(n);
  for (const auto& n : b) EXPECT_TRUE(a.count(n)) << n;
  std::set<std::string> removed;
  for (const auto& n : a) {
    if (!b.count(n)) removed.insert(n);
  }
  std::set<std::string> expected;
  for (std::size_t i = 0; i < on.n_blocks; ++i) {
    const std::string p = "blocks." + std::to_string(i) + ".mixer.";
    for (const char* l : {"w1", "w2", "w3", "w4"}) {
      expected.insert(p + l + ".weight");
      expected.insert(p + l + ".bias");
    }
    for (const char* l : {"norm_t", "norm_f"}) {
      expected.insert(p + l + ".gamma");
      expected.insert(p + l + ".beta");
    }
  }
  EXPECT_EQ(removed, expected);
}

TEST(Model, SameSeedSameWeights) {
  const auto a = build_model(ModelConfig{}, 5), b = build_model(ModelConfig{}, 5), c = build_model(ModelConfig{}, 6);
  const auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
  bool differs = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_TRUE(std::equal(pa[i].second.data().begin(), pa[i].second.data().end(), pb[i].second.data().begin()));
    differs |= !std::equal(pa[i].second.data().begin(), pa[i].second.data().end(), pc[i].second.data().begin());
  }
  EXPECT_TRUE(differs);
}

TEST(Model, InitScheme) {
  const auto m = build_model(ModelConfig{}, 2);
  for (const auto& [n, t] : m.parameters()) {
    const auto v = t.data();
    if (n.ends_with(".bias") || n.ends_with(".beta")) {
      EXPECT_TRUE(std::all_of(v.begin(), v.end(), [](float x) { return x == 0.0f; })) << n;
    } else if (n.ends_with(".gamma")) {
      EXPECT_TRUE(std::all_of(v.begin(), v.end(), [](float x) { return x == 1.0f; })) << n;
    } else {
      const std::size_t fan_in = t.size() / t.dim(0);
      const float bound = static_cast<float>(std::sqrt(6.0 / static_cast<double>(fan_in)));
      EXPECT_TRUE(std::all_of(v.begin(), v.end(), [&](float x) { return std::abs(x) <= bound; })) << n;
    }
  }
}

TEST(Model, ForwardShapeAndDeterminism) {
  ModelConfig cfg = oracle::ledger_cases()[0].cfg;
  auto m = build_model(cfg, 3);
  std::mt19937_64 gen(1);
  auto x = oracle::random_tensor<float>({3, cfg.n_frames, cfg.n_mels}, gen);
  Tape t1(false), t2(false);
  Tensor a = forward(t1, m, x, ops::Mode::kEval), b = forward(t2, m, x, ops::Mode::kEval);
  EXPECT_EQ(a.shape(), Shape({3, 12}));
  EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
  Tape t3(false);
  EXPECT_THROW(forward(t3, m, oracle::random_tensor<float>({3, cfg.n_mels, cfg.n_frames}, gen), ops::Mode::kEval),
               std::invalid_argument);
}

TEST(Model, DefaultForwardRuns) {
  auto m = build_model(ModelConfig{}, 0);
  Tensor x({2, 98, 64});
  Tape tape(false);
  Tensor y = forward(tape, m, x, ops::Mode::kEval);
  EXPECT_EQ(y.shape(), Shape({2, 12}));
  for (float v : y.data()) EXPECT_TRUE(std::isfinite(v));
}

TEST(Mixer, ZeroWeightsAreIdentity) {
  Rng rng(4);
  auto mixer = build_mixer<float>(7, 5, 6, 3, rng);
  for (auto* l : {&mixer.w1, &mixer.w2, &mixer.w3, &mixer.w4}) {
    std::fill(l->weight.data().begin(), l->weight.data().end(), 0.0f);
  }
  std::mt19937_64 gen(2);
  auto x = oracle::random_tensor<float>({2, 5, 7}, gen);
  Tape tape(false);
  Tensor y = mixer_forward(tape, mixer, x);
  EXPECT_TRUE(std::equal(y.data().begin(), y.data().end(), x.data().begin()));
}

TEST(Mixer, BatchedMatchesPerSliceOracle) {
  Rng rng(5);
  auto mixer = build_mixer<float>(9, 6, 5, 4, rng);
  std::mt19937_64 gen(3);
  for (auto* ln : {&mixer.norm_t, &mixer.norm_f}) {
    for (auto& g : ln->gamma.data()) g = static_cast<float>(0.5 + std::uniform_real_distribution<double>(0, 1)(gen));
    for (auto& b : ln->beta.data()) b = static_cast<float>(std::uniform_real_distribution<double>(-0.5, 0.5)(gen));
  }
  for (auto* l : {&mixer.w1, &mixer.w2, &mixer.w3, &mixer.w4}) {
    for (auto& b : l->bias.data()) b = static_cast<float>(std::uniform_real_distribution<double>(-0.5, 0.5)(gen));
  }
  auto x = oracle::random_tensor<float>({3, 6, 9}, gen, -2, 2);
  Tape tape(false);
  Tensor y = mixer_forward(tape, mixer, x);
  const auto ref = oracle::mixer(x, mixer);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y.data()[i], ref[i], 1e-6) << i;
}

TEST(Block, GradientsMatchFiniteDifferences) {
  ModelConfig cfg = oracle::ledger_cases()[0].cfg;
  cfg.n_frames = 5;
  Rng rng(6);
  auto block = build_block<double>(cfg, rng);
  std::mt19937_64 gen(7);
  D x = oracle::random_tensor<double>({2, cfg.channels, cfg.n_frames}, gen);
  D r = oracle::random_tensor<double>({2, cfg.channels, cfg.n_frames}, gen, 0.5, 1.5);
  // Non-trivial affine parameters so no gradient vanishes by construction.
  for (auto* bn : {&block.bn_freq, &block.bn_temp}) {
    for (auto& g : bn->gamma.data()) g = std::uniform_real_distribution<double>(0.5, 1.5)(gen);
    for (auto& b : bn->beta.data()) b = std::uniform_real_distribution<double>(-0.5, 0.5)(gen);
  }
  std::vector<D> inputs = {x};
  auto collect = [&](const D& t) { inputs.push_back(t); };
  // Biases whose effect is a per-channel constant in front of a train-mode
  // BatchNorm (f_compress, both f2 convs) have an exactly zero gradient;
  // finite differences only see rounding there, so they are checked
  // separately below.
  for (auto* c : {&block.f_expand, &block.f1.depthwise, &block.f1.pointwise}) {
    collect(c->weight);
    collect(c->bias);
  }
  for (auto* c : {&block.f_compress, &block.f2.depthwise, &block.f2.pointwise}) collect(c->weight);
  for (auto* bn : {&block.bn_freq, &block.bn_temp}) collect(bn->gamma), collect(bn->beta);
  auto& m = *block.mixer;
  for (auto* l : {&m.w1, &m.w2, &m.w3, &m.w4}) collect(l->weight), collect(l->bias);
  for (auto* l : {&m.norm_t, &m.norm_f}) collect(l->gamma), collect(l->beta);
  auto loss = [&](DTape& t) {
        // Fresh running stats each call: the train-mode update must not leak
        // between finite-difference evaluations.
        block.bn_freq.stats = {D({cfg.channels}), D({cfg.channels}, std::vector<double>(cfg.channels, 1.0))};
        block.bn_temp.stats = {D({cfg.channels}), D({cfg.channels}, std::vector<double>(cfg.channels, 1.0))};
        return ops::sum(t, ops::mul(t, convmixer_block_forward(t, block, x, ops::Mode::kTrain), r));
  };
  const auto report = grad_check<double>(loss, inputs, 1e-4, 1e-4);
  EXPECT_TRUE(report.passed) << "max rel " << report.max_rel_error << " input " << report.worst_input << "["
                             << report.worst_index << "] analytic " << report.analytic << " numeric "
                             << report.numeric;
  EXPECT_GT(report.checked, 150u);

  const std::vector<D> biases = {block.f_compress.bias, block.f2.depthwise.bias, block.f2.pointwise.bias};
  const auto cancelled = grad_check<double>(loss, biases, 1e-4, 1.0);
  for (const auto& b : biases) {
    for (double g : b.grad()) EXPECT_LT(std::abs(g), 1e-12);
  }
  EXPECT_LT(std::abs(cancelled.numeric), 1e-8);
}

TEST(Model, CastAndCopyState) {
  const ModelConfig cfg = oracle::ledger_cases()[2].cfg;
  auto m = build_model(cfg, 8);
  auto d = cast_model<double>(m);
  auto back = cast_model<float>(d);
  const auto a = m.state(), b = back.state();
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_TRUE(std::equal(a[i].second.data().begin(), a[i].second.data().end(), b[i].second.data().begin()));
  }
  auto other = build_model(cfg, 9);
  copy_state(m, other);
  const auto c = other.state();
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_TRUE(std::equal(a[i].second.data().begin(), a[i].second.data().end(), c[i].second.data().begin()));
  }
  ModelConfig bigger = cfg;
  bigger.channels += 1;
  auto mismatch = build_model(bigger, 0);
  EXPECT_THROW(copy_state(m, mismatch), std::invalid_argument);
}

TEST(ModelConfig, RejectsZeroExtents) {
  ModelConfig cfg;
  cfg.channels = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace kws
