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

// One PASS/FAIL line per acceptance criterion. Tolerances are fixed here.
//
//   kws_acceptance --work DIR [--only 1,2,...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kws/augment.hpp"
#include "kws/checkpoint.hpp"
#include "kws/config.hpp"
#include "kws/eval.hpp"
#include "kws/frontend.hpp"
#include "kws/gradcheck.hpp"
#include "kws/model.hpp"
#include "kws/ops.hpp"
#include "kws/synth.hpp"
#include "kws/trainer.hpp"
#include "oracles.hpp"

namespace kws {
namespace {

using D = BasicTensor<double>;
using DTape = BasicTape<double>;
namespace fs = std::filesystem;

constexpr double kGradStep = 1e-4;
constexpr double kGradTol = 1e-4;
constexpr double kGradSeconds = 60.0;
constexpr int kCurriculumRuns = 1000;
constexpr double kSnrTolDb = 1e-6;
constexpr std::size_t kMinParams = 100000, kMaxParams = 140000;
constexpr std::uint64_t kMinMacs = 18000000, kMaxMacs = 27000000;
constexpr double kCleanValTarget = 0.95;
constexpr double kFarTarget = 0.70;
constexpr double kAblationGap = 0.02;
constexpr double kTrainMinutes = 15.0;
constexpr double kMixerTol = 1e-6;
constexpr std::uint64_t kEvalSeed = 7;
const std::vector<std::uint64_t> kSeeds = {0, 1, 2};

// Desk-scale run, shared with the command line (configs/desk.txt).
constexpr const char* kDeskConfigPath = KWS_DESK_CONFIG;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ------------------------------------------------------------------ 1

// sum(f * R) with a fixed random R, so no gradient vanishes by symmetry.
GradCheckReport weighted_check(const std::function<D(DTape&)>& f, std::vector<D> inputs, std::uint64_t seed) {
  D probe;
  {
    DTape tape(false);
    probe = f(tape);
  }
  std::mt19937_64 gen(seed);
  const D r = oracle::random_tensor<double>(probe.shape(), gen, 0.5, 1.5);
  return grad_check<double>([&](DTape& t) { return ops::sum(t, ops::mul(t, f(t), r)); }, std::move(inputs),
                            kGradStep, kGradTol);
}

Outcome criterion_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 gen(100);
  auto rand = [&](Shape s, double lo = -1, double hi = 1) { return oracle::random_tensor<double>(s, gen, lo, hi); };
  std::map<std::string, GradCheckReport> reports;

  {
    D x = rand({2, 4, 6}), w = rand({4, 2, 3}), b = rand({4});
    reports["conv1d"] = weighted_check([&](DTape& t) { return ops::conv(t, x, w, b, {1, 2}); }, {x, w, b}, 1);
  }
  {
    D x = rand({2, 3, 4, 5}), w = rand({3, 1, 3, 2}), b = rand({3});
    reports["conv2d_depthwise"] = weighted_check([&](DTape& t) { return ops::conv(t, x, w, b, {2, 3}); }, {x, w, b}, 2);
  }
  {
    D x = rand({1, 2, 4, 4}), w = rand({3, 2, 3, 3}), b = rand({3});
    reports["conv2d"] = weighted_check([&](DTape& t) { return ops::conv(t, x, w, b, {2, 1}); }, {x, w, b}, 3);
  }
  {
    D x = rand({3, 2, 4}, -2, 2), g = rand({2}, 0.5, 1.5), b = rand({2});
    reports["batch_norm_train"] = weighted_check(
        [&](DTape& t) {
          ops::BatchNormStats<double> s{D({2}), D({2}, {1.0, 1.0})};
          return ops::batch_norm(t, x, g, b, s, ops::Mode::kTrain);
        },
        {x, g, b}, 4);
  }
  {
    D x = rand({2, 3, 4}), g = rand({3}, 0.5, 1.5), b = rand({3});
    ops::BatchNormStats<double> s{rand({3}), rand({3}, 0.5, 2.0)};
    reports["batch_norm_eval"] =
        weighted_check([&](DTape& t) { return ops::batch_norm(t, x, g, b, s, ops::Mode::kEval); }, {x, g, b}, 5);
  }
  {
    D x = rand({2, 3, 5}), g = rand({5}, 0.5, 1.5), b = rand({5});
    reports["layer_norm"] = weighted_check([&](DTape& t) { return ops::layer_norm(t, x, g, b); }, {x, g, b}, 6);
  }
  {
    D x = rand({2, 3, 5}), w = rand({4, 5}), b = rand({4});
    reports["linear"] = weighted_check([&](DTape& t) { return ops::linear(t, x, w, b); }, {x, w, b}, 7);
  }
  {
    D x = rand({4, 3}, -3, 3);
    reports["swish"] = weighted_check([&](DTape& t) { return ops::swish(t, x); }, {x}, 8);
    reports["gelu"] = weighted_check([&](DTape& t) { return ops::gelu(t, x); }, {x}, 9);
  }
  {
    D x = rand({2, 3, 4});
    reports["transpose_reshape"] =
        weighted_check([&](DTape& t) { return ops::reshape(t, ops::transpose_ft(t, x), {2, 12}); }, {x}, 10);
    reports["mean_last"] = weighted_check([&](DTape& t) { return ops::mean_last(t, x); }, {x}, 11);
  }
  {
    D a = rand({3, 2}), b = rand({3, 2});
    reports["add_mul"] = weighted_check([&](DTape& t) { return ops::mul(t, ops::add(t, a, b), a); }, {a, b}, 12);
  }
  {
    D z = rand({3, 4}, -4, 4), y = rand({3, 4}, 0, 1);
    reports["bce"] =
        grad_check<double>([&](DTape& t) { return ops::bce_with_logits(t, z, y); }, {z}, kGradStep, kGradTol);
  }

  // One full block, mixer included.
  ModelConfig cfg = oracle::ledger_cases()[0].cfg;
  cfg.n_frames = 5;
  Rng rng(6);
  auto block = build_block<double>(cfg, rng);
  std::mt19937_64 bgen(7);
  const D x = oracle::random_tensor<double>({2, cfg.channels, cfg.n_frames}, bgen);
  const D r = oracle::random_tensor<double>({2, cfg.channels, cfg.n_frames}, bgen, 0.5, 1.5);
  for (auto* bn : {&block.bn_freq, &block.bn_temp}) {
    for (auto& g : bn->gamma.data()) g = std::uniform_real_distribution<double>(0.5, 1.5)(bgen);
    for (auto& b : bn->beta.data()) b = std::uniform_real_distribution<double>(-0.5, 0.5)(bgen);
  }
  std::vector<D> all = {x};
  for (const auto& [name, t] : [&] {
         Named<double> out;
         auto add = [&](const char* n, const D& t) { out.emplace_back(n, t); };
         for (auto* c : {&block.f_expand, &block.f1.depthwise, &block.f1.pointwise, &block.f_compress,
                         &block.f2.depthwise, &block.f2.pointwise}) {
           add("w", c->weight);
           add("b", c->bias);
         }
         for (auto* bn : {&block.bn_freq, &block.bn_temp}) add("g", bn->gamma), add("b", bn->beta);
         auto& m = *block.mixer;
         for (auto* l : {&m.w1, &m.w2, &m.w3, &m.w4}) add("w", l->weight), add("b", l->bias);
         for (auto* l : {&m.norm_t, &m.norm_f}) add("g", l->gamma), add("b", l->beta);
         return out;
       }()) {
    all.push_back(t);
  }
  const std::set<const void*> cancelled = {block.f_compress.bias.id(), block.f2.depthwise.bias.id(),
                                           block.f2.pointwise.bias.id()};

  // Eval-mode BatchNorm: every parameter has a live gradient.
  block.bn_freq.stats = {oracle::random_tensor<double>({cfg.channels}, bgen),
                         oracle::random_tensor<double>({cfg.channels}, bgen, 0.5, 2.0)};
  block.bn_temp.stats = {oracle::random_tensor<double>({cfg.channels}, bgen),
                         oracle::random_tensor<double>({cfg.channels}, bgen, 0.5, 2.0)};
  reports["block_eval"] = grad_check<double>(
      [&](DTape& t) { return ops::sum(t, ops::mul(t, convmixer_block_forward(t, block, x, ops::Mode::kEval), r)); },
      all, kGradStep, kGradTol);

  // Train-mode BatchNorm. Biases that only add a per-channel constant ahead
  // of it have an identically zero gradient and are checked for that.
  auto train_loss = [&](DTape& t) {
    block.bn_freq.stats = {D({cfg.channels}), D({cfg.channels}, std::vector<double>(cfg.channels, 1.0))};
    block.bn_temp.stats = {D({cfg.channels}), D({cfg.channels}, std::vector<double>(cfg.channels, 1.0))};
    return ops::sum(t, ops::mul(t, convmixer_block_forward(t, block, x, ops::Mode::kTrain), r));
  };
  std::vector<D> live, dead;
  for (const auto& t : all) (cancelled.count(t.id()) ? dead : live).push_back(t);
  reports["block_train"] = grad_check<double>(train_loss, live, kGradStep, kGradTol);
  const auto zero = grad_check<double>(train_loss, dead, kGradStep, 1.0);
  double max_dead = 0.0;
  for (const auto& b : dead)
    for (double g : b.grad()) max_dead = std::max(max_dead, std::abs(g));
  const bool dead_ok = max_dead < 1e-12 && std::abs(zero.numeric) < 1e-8;

  bool ok = dead_ok;
  double worst = 0.0;
  std::string worst_name;
  for (const auto& [name, rep] : reports) {
    ok = ok && rep.passed;
    if (rep.max_rel_error >= worst) worst = rep.max_rel_error, worst_name = name;
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < kGradSeconds;
  return {ok, std::to_string(reports.size()) + " checks, max rel err " + fmt("%.2e", worst) + " (" + worst_name +
                  "), zero-gradient biases " + (dead_ok ? "ok" : "NOT zero") + ", " + fmt("%.1f", secs) + " s"};
}

// ------------------------------------------------------------------ 2

Outcome criterion_curriculum_oracle() {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> u(0, 1);
  int advances = 0, finishes = 0, ties = 0, epochs = 0;
  for (int run = 0; run < kCurriculumRuns; ++run) {
    const int n = 20 + static_cast<int>(gen() % 181);
    std::vector<double> acc(n), loss(n);
    const bool coarse = run % 3 == 0;  // coarse values make ties common
    const double drift = run % 2 ? 0.002 : 0.0;
    for (int i = 0; i < n; ++i) {
      acc[i] = coarse ? std::round(u(gen) * 4) / 4 : u(gen) + drift * i;
      loss[i] = coarse ? std::round(u(gen) * 4) / 4 : u(gen) - drift * i;
    }
    const auto want = oracle::simulate_curriculum(acc, loss, 10);
    CurriculumState s;
    for (std::size_t e = 0; e < want.size(); ++e) {
      const bool first = s.acc_history.empty();
      s.record(acc[e], loss[e]);
      const double c = progress_criterion(s);
      if (first && c != 0.0) return {false, "first epoch of a stage gave c=" + fmt("%g", c)};
      const double before = s.bst_crit;
      const Decision d = curriculum_update(s, c);
      const oracle::CurriculumSnapshot got{s.stage, c, s.bst_crit, s.epochs_since_best, static_cast<int>(d)};
      if (!(got == want[e])) {
        return {false, "run " + std::to_string(run) + " epoch " + std::to_string(e + 1) + " diverged"};
      }
      ties += c == before;
      advances += d == Decision::kAdvanceStage;
      finishes += d == Decision::kFinish;
      ++epochs;
    }
  }
  return {true, std::to_string(kCurriculumRuns) + " runs, " + std::to_string(epochs) + " epochs, " +
                    std::to_string(advances) + " advances, " + std::to_string(finishes) + " finishes, " +
                    std::to_string(ties) + " ties, exact"};
}

// ------------------------------------------------------------------ 3

Waveform gaussian(std::uint64_t seed, std::size_t n, double scale) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> d(0.0, scale);
  Waveform w{std::vector<float>(n), kSampleRate};
  for (auto& s : w.samples) s = static_cast<float>(d(gen));
  return w;
}

double mean_square(const std::vector<float>& v) {
  double acc = 0.0;
  for (float s : v) acc += static_cast<double>(s) * s;
  return acc / static_cast<double>(v.size());
}

Outcome criterion_snr() {
  const int levels[] = {0, -5, -10, 20};
  std::mt19937_64 gen(77);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    NoiseBank noises;
    noises.clips.push_back(gaussian(5000 + trial, 16000 + gen() % 32000, 0.05 + 0.5 * std::generate_canonical<double, 53>(gen)));
    const Waveform clean = gaussian(1000 + trial, 16000, 0.005 + 0.3 * std::generate_canonical<double, 53>(gen));
    const int snr = levels[trial % 4];
    Rng rng(trial);
    const auto out = apply_condition_traced(clean, Condition::noisy(snr), noises, {}, rng);
    const double realized = 10.0 * std::log10(mean_square(out.signal.samples) / mean_square(out.noise.samples));
    worst = std::max(worst, std::abs(realized - snr));
  }
  return {worst < kSnrTolDb, "100 triples, max |error| " + fmt("%.2e", worst) + " dB"};
}

// ------------------------------------------------------------------ 4

Outcome criterion_features() {
  std::mt19937_64 gen(4);
  const std::size_t lengths[] = {16000, 15999, 12345, 8000, 640, 400, 1};
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = trial < 7 ? lengths[trial] : 1 + gen() % 16000;
    const Waveform w = gaussian(trial, n, 0.1);
    const FeatureMatrix f = log_mel_fbank(pad_or_trim(w));
    if (f.frames != 98 || f.bins != 64 || f.values.size() != 98 * 64) {
      return {false, "length " + std::to_string(n) + " gave " + std::to_string(f.frames) + "x" + std::to_string(f.bins)};
    }
    // Right zero padding, built by hand.
    Waveform padded{std::vector<float>(16000, 0.0f), kSampleRate};
    std::copy(w.samples.begin(), w.samples.end(), padded.samples.begin());
    if (log_mel_fbank(padded).values != f.values) return {false, "padding is not right-zero for length " + std::to_string(n)};
    for (float v : f.values)
      if (!std::isfinite(v)) return {false, "non-finite feature"};
  }
  return {true, "20 inputs of 1..16000 samples -> 98x64, right zero padded"};
}

// ------------------------------------------------------------------ 5

Outcome criterion_budget() {
  const ModelConfig def;
  const std::size_t params = count_params(build_model(def, 0));
  const std::uint64_t macs = count_macs(def);
  bool ok = params >= kMinParams && params <= kMaxParams && macs >= kMinMacs && macs <= kMaxMacs;
  std::string ledgers;
  for (const auto& c : oracle::ledger_cases()) {
    const bool match = count_params(build_model(c.cfg, 0)) == c.params && count_macs(c.cfg) == c.macs;
    ok = ok && match;
    ledgers += std::string(" ") + c.name + (match ? "=ok" : "=MISMATCH");
  }
  return {ok, "params " + std::to_string(params) + ", MACs " + std::to_string(macs) + ", ledgers" + ledgers};
}

// ------------------------------------------------------------------ 6, 7

struct Corpus {
  DatasetManifest manifest;
  NoiseBank noises;
  RirBank rirs;
};

Corpus make_corpus(const fs::path& work) {
  const fs::path root = work / "synth";
  if (!fs::exists(root / "speech_commands" / "testing_list.txt")) {
    SynthConfig sc;  // 4 keywords, 200 per class
    synth_dataset(root, sc);
  }
  return {build_manifest(root / "speech_commands"), load_bank(root / "noise"), load_bank(root / "rir")};
}

RunConfig desk_config() {
  RunConfig rc;
  apply_key_values(rc, read_key_values(kDeskConfigPath));
  return rc;
}

struct ArmRun {
  EvalResult test;
  double clean_val = 0.0;
  double seconds = 0.0;
  int epochs = 0;
  std::string metrics;
  ConvMixerModel model;
};

ArmRun run_arm(const Corpus& c, RunConfig rc, const fs::path& out) {
  const auto t0 = std::chrono::steady_clock::now();
  TrainOptions opts;
  opts.out_dir = out;
  TrainResult r = train({c.manifest, c.noises, c.rirs}, rc.model, rc.train, rc.frontend, opts);
  ArmRun a;
  a.seconds = seconds_since(t0);
  a.epochs = static_cast<int>(r.log.size());
  a.metrics = metrics_csv(r.log);
  a.model = std::move(r.model);
  a.test = evaluate_matrix(a.model, c.manifest, c.noises, c.rirs, kEvalSeed, rc.frontend);
  const auto val = c.manifest.split(Split::kValidation);
  const ClipLoader loader(c.manifest);
  a.clean_val = evaluate(model_logits(a.model), {val, loader, c.noises, c.rirs}, eval_condition(0), kEvalSeed,
                         rc.frontend);
  return a;
}

struct Arms {
  std::vector<ArmRun> curriculum, no_mixer, no_curriculum;
};

Arms run_arms(const Corpus& c, const fs::path& work) {
  Arms arms;
  for (std::uint64_t seed : kSeeds) {
    const std::string s = std::to_string(seed);
    RunConfig base = desk_config();
    base.train.seed = seed;
    auto report_line = [&](const char* arm, const ArmRun& a) {
      std::cout << "  " << arm << " seed " << s << ": " << a.epochs << " epochs, " << fmt("%.0f", a.seconds)
                << " s, clean val " << fmt("%.2f", 100 * a.clean_val) << ", test";
      for (auto col : kEvalColumns) std::cout << " " << col << " " << fmt("%.2f", 100 * a.test.accuracy.at(std::string(col)));
      std::cout << std::endl;
    };
    arms.curriculum.push_back(run_arm(c, base, work / ("curriculum_" + s)));
    report_line("curriculum", arms.curriculum.back());
    RunConfig nm = base;
    nm.model.mixer_enabled = false;
    arms.no_mixer.push_back(run_arm(c, nm, work / ("no_mixer_" + s)));
    report_line("no-mixer", arms.no_mixer.back());
    RunConfig nc = base;
    nc.train.curriculum = false;
    arms.no_curriculum.push_back(run_arm(c, nc, work / ("no_curriculum_" + s)));
    report_line("no-curriculum", arms.no_curriculum.back());
  }
  return arms;
}

double mean_of(const std::vector<ArmRun>& runs, const std::function<double(const ArmRun&)>& f) {
  double s = 0;
  for (const auto& r : runs) s += f(r);
  return s / static_cast<double>(runs.size());
}

std::vector<Outcome> criterion_desk(const Arms& arms) {
  auto far = [](const ArmRun& a) { return a.test.accuracy.at("-10dB"); };
  const double val = mean_of(arms.curriculum, [](const ArmRun& a) { return a.clean_val; });
  const double cur_far = mean_of(arms.curriculum, far);
  double slowest = 0;
  for (const auto& a : arms.curriculum) slowest = std::max(slowest, a.seconds);
  const double nm_far = mean_of(arms.no_mixer, far);
  const double nc_far = mean_of(arms.no_curriculum, far);
  std::vector<Outcome> out;
  out.push_back({val >= kCleanValTarget && cur_far >= kFarTarget && slowest <= kTrainMinutes * 60,
                 "clean val " + fmt("%.2f", 100 * val) + " (>= 95), -10dB+RIR test " + fmt("%.2f", 100 * cur_far) +
                     " (>= 70), slowest run " + fmt("%.0f", slowest) + " s"});
  out.push_back({cur_far - nm_far >= kAblationGap, "-10dB mixer " + fmt("%.2f", 100 * cur_far) + " vs no-mixer " +
                                                       fmt("%.2f", 100 * nm_far) + " (gap >= 2)"});
  out.push_back({cur_far - nc_far >= kAblationGap, "-10dB curriculum " + fmt("%.2f", 100 * cur_far) +
                                                       " vs no-curriculum " + fmt("%.2f", 100 * nc_far) +
                                                       " (gap >= 2)"});
  return out;
}

Outcome criterion_determinism(const Corpus& c, const fs::path& work, const ConvMixerModel* trained) {
  RunConfig rc = desk_config();
  rc.train.max_epochs = 3;
  rc.train.seed = 11;
  TrainResult a = train({c.manifest, c.noises, c.rirs}, rc.model, rc.train, rc.frontend, {work / "det_a"});
  TrainResult b = train({c.manifest, c.noises, c.rirs}, rc.model, rc.train, rc.frontend, {work / "det_b"});
  const bool same_log = metrics_csv(a.log) == metrics_csv(b.log);

  ConvMixerModel m = trained ? *trained : std::move(a.model);
  save_checkpoint(m, work / "roundtrip.ckpt");
  ConvMixerModel back = load_checkpoint(work / "roundtrip.ckpt");
  const bool same_bytes = serialize_checkpoint(back) == serialize_checkpoint(m);

  const auto test = c.manifest.split(Split::kTest);
  const ClipLoader loader(c.manifest);
  const EvalData data{test, loader, c.noises, c.rirs};
  bool same_logits = true;
  for (std::size_t col : {std::size_t{0}, kNumEvalColumns - 1}) {
    same_logits = same_logits && evaluate_logits(model_logits(m), data, eval_condition(col), kEvalSeed) ==
                                     evaluate_logits(model_logits(back), data, eval_condition(col), kEvalSeed);
  }
  return {same_log && same_bytes && same_logits,
          std::string("metrics ") + (same_log ? "identical" : "DIFFER") + ", checkpoint bytes " +
              (same_bytes ? "identical" : "DIFFER") + ", logits " + (same_logits ? "identical" : "DIFFER")};
}

// ------------------------------------------------------------------ 8

Outcome criterion_mixer() {
  Rng rng(4);
  auto zero = build_mixer<float>(7, 5, 6, 3, rng);
  for (auto* l : {&zero.w1, &zero.w2, &zero.w3, &zero.w4})
    std::fill(l->weight.data().begin(), l->weight.data().end(), 0.0f);
  std::mt19937_64 gen(2);
  const Tensor x = oracle::random_tensor<float>({2, 5, 7}, gen);
  Tape tape(false);
  const Tensor y = mixer_forward(tape, zero, x);
  const bool identity = std::equal(y.data().begin(), y.data().end(), x.data().begin());

  auto mixer = build_mixer<float>(9, 6, 5, 4, rng);
  for (auto* ln : {&mixer.norm_t, &mixer.norm_f}) {
    for (auto& g : ln->gamma.data()) g = static_cast<float>(0.5 + std::uniform_real_distribution<double>(0, 1)(gen));
    for (auto& b : ln->beta.data()) b = static_cast<float>(std::uniform_real_distribution<double>(-0.5, 0.5)(gen));
  }
  for (auto* l : {&mixer.w1, &mixer.w2, &mixer.w3, &mixer.w4})
    for (auto& b : l->bias.data()) b = static_cast<float>(std::uniform_real_distribution<double>(-0.5, 0.5)(gen));
  const Tensor xb = oracle::random_tensor<float>({3, 6, 9}, gen, -2, 2);
  const Tensor yb = mixer_forward(tape, mixer, xb);
  const auto ref = oracle::mixer(xb, mixer);
  double worst = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(double(yb.data()[i]) - ref[i]));

  ModelConfig on;
  ModelConfig off = on;
  off.mixer_enabled = false;
  std::set<std::string> a, b, removed, expected;
  for (const auto& [n, t] : build_model(on, 0).parameters()) a.insert(n);
  for (const auto& [n, t] : build_model(off, 0).parameters()) b.insert(n);
  bool subset = true;
  for (const auto& n : b) subset = subset && a.count(n);
  for (const auto& n : a)
    if (!b.count(n)) removed.insert(n);
  for (std::size_t i = 0; i < on.n_blocks; ++i) {
    const std::string p = "blocks." + std::to_string(i) + ".mixer.";
    for (const char* l : {"w1", "w2", "w3", "w4"}) expected.insert(p + l + ".weight"), expected.insert(p + l + ".bias");
    for (const char* l : {"norm_t", "norm_f"}) expected.insert(p + l + ".gamma"), expected.insert(p + l + ".beta");
  }
  const bool group = subset && removed == expected;
  return {identity && worst < kMixerTol && group,
          std::string("zero-weight identity ") + (identity ? "exact" : "BROKEN") + ", batched vs per-slice max " +
              fmt("%.1e", worst) + ", removed group " + (group ? "exact" : "WRONG") + " (" +
              std::to_string(removed.size()) + " tensors)"};
}

}  // namespace
}  // namespace kws

int main(int argc, char** argv) {
  using namespace kws;
  CLI::App app{"ConvMixer-KWS acceptance criteria"};
  std::string work = "acceptance_work";
  std::vector<int> only;
  app.add_option("--work", work, "Scratch directory for the synthetic corpus and runs");
  app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(work);
  auto wanted = [&](int n) { return only.empty() || std::find(only.begin(), only.end(), n) != only.end(); };

  int failures = 0;
  auto line = [&](const std::string& id, const std::string& name, const Outcome& o) {
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << id << " " << name << ": " << o.detail << std::endl;
    failures += !o.pass;
  };
  auto guarded = [&](const std::string& id, const std::string& name, const std::function<Outcome()>& f) {
    try {
      line(id, name, f());
    } catch (const std::exception& e) {
      line(id, name, {false, std::string("exception: ") + e.what()});
    }
  };

  if (wanted(1)) guarded("1", "gradient correctness", criterion_gradients);
  if (wanted(2)) guarded("2", "curriculum oracle equivalence", criterion_curriculum_oracle);
  if (wanted(3)) guarded("3", "SNR fidelity", criterion_snr);
  if (wanted(4)) guarded("4", "feature contract", criterion_features);
  if (wanted(5)) guarded("5", "efficiency budget", criterion_budget);
  std::optional<Corpus> corpus;
  std::optional<Arms> arms;
  if (wanted(6) || wanted(7)) {
    try {
      corpus = make_corpus(work);
    } catch (const std::exception& e) {
      line("6/7", "synthetic corpus", {false, std::string("exception: ") + e.what()});
    }
  }
  if (wanted(6) && corpus) {
    try {
      arms = run_arms(*corpus, work);
      const auto d = criterion_desk(*arms);
      line("6", "desk-scale end-to-end", d[0]);
      line("6a", "mixer ablation", d[1]);
      line("6b", "curriculum ablation", d[2]);
    } catch (const std::exception& e) {
      line("6", "desk-scale end-to-end", {false, std::string("exception: ") + e.what()});
    }
  }
  if (wanted(7) && corpus) {
    guarded("7", "determinism and checkpointing", [&] {
      return criterion_determinism(*corpus, work, arms ? &arms->curriculum.front().model : nullptr);
    });
  }
  if (wanted(8)) guarded("8", "mixer structure", criterion_mixer);
  return failures == 0 ? 0 : 1;
}
