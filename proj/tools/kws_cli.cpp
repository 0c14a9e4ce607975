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

// kws: synthetic data, training, evaluation, counting and feature dumps.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kws/audio_io.hpp"
#include "kws/augment.hpp"
#include "kws/checkpoint.hpp"
#include "kws/config.hpp"
#include "kws/eval.hpp"
#include "kws/frontend.hpp"
#include "kws/model.hpp"
#include "kws/synth.hpp"
#include "kws/trainer.hpp"

namespace {

using namespace kws;

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (!path.empty()) apply_key_values(cfg, read_key_values(path));
  std::string text;
  for (const auto& o : overrides) text += o + "\n";
  apply_key_values(cfg, parse_key_values(text));
  return cfg;
}

int run_synth(const std::string& out, std::uint64_t seed, int per_class) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.per_class = per_class;
  synth_dataset(out, cfg);
  std::cout << "wrote " << out << "/speech_commands, " << out << "/noise, " << out << "/rir\n";
  return 0;
}

int run_train(const std::string& data, const std::string& noise, const std::string& rir, const std::string& config,
              const std::string& out, bool no_mixer, bool no_curriculum, std::optional<std::uint64_t> seed,
              const std::vector<std::string>& overrides) {
  RunConfig cfg = load_run_config(config, overrides);
  if (no_mixer) cfg.model.mixer_enabled = false;
  if (no_curriculum) cfg.train.curriculum = false;
  if (seed) cfg.train.seed = *seed;
  const DatasetManifest manifest = build_manifest(data);
  const NoiseBank noises = load_bank(noise);
  const RirBank rirs = load_bank(rir);
  std::filesystem::create_directories(out);
  {
    std::ofstream f(std::filesystem::path(out) / "config.txt");
    f << format_key_values(to_key_values(cfg));
  }
  TrainOptions options{out, &std::cout};
  const TrainResult result = train({manifest, noises, rirs}, cfg.model, cfg.train, cfg.frontend, options);
  std::cout << "epochs " << result.log.size() << ", stage advances " << result.stage_advances << ", checkpoint "
            << (std::filesystem::path(out) / "best.ckpt").string() << "\n";
  return 0;
}

int run_eval(const std::string& checkpoint, const std::string& data, const std::string& noise,
             const std::string& rir, std::uint64_t seed, const std::string& report_base, const std::string& name) {
  ConvMixerModel model = load_checkpoint(checkpoint);
  const DatasetManifest manifest = build_manifest(data);
  const NoiseBank noises = load_bank(noise);
  const RirBank rirs = load_bank(rir);
  EvalResult result = evaluate_matrix(model, manifest, noises, rirs, seed);
  result.model = name;
  std::cout << report_table({result});
  if (!report_base.empty()) report({result}, report_base);
  return 0;
}

int run_count(const std::string& config) {
  const RunConfig cfg = load_run_config(config, {});
  const ConvMixerModel model = build_model(cfg.model, 0);
  std::printf("params %zu\nmacs %llu\n", count_params(model),
              static_cast<unsigned long long>(count_macs(cfg.model)));
  return 0;
}

int run_features(const std::string& wav, const std::string& out) {
  const FeatureMatrix f = log_mel_fbank(pad_or_trim(read_wav(wav)));
  std::ofstream csv(out);
  if (!csv) throw std::runtime_error("cannot write " + out);
  char buf[32];
  for (std::size_t t = 0; t < f.frames; ++t) {
    for (std::size_t b = 0; b < f.bins; ++b) {
      std::snprintf(buf, sizeof buf, "%.6g", static_cast<double>(f.at(t, b)));
      csv << (b ? "," : "") << buf;
    }
    csv << "\n";
  }
  if (!csv) throw std::runtime_error("write failed for " + out);
  return 0;
}

int run_augment(const std::string& wav, std::optional<int> snr, const std::string& rir_flag,
                const std::string& noise_dir, const std::string& rir_dir, std::uint64_t seed, const std::string& out) {
  if (rir_flag != "on" && rir_flag != "off") throw std::invalid_argument("--rir must be on or off");
  const Condition cond{snr, rir_flag == "on"};
  if (cond.snr_db && noise_dir.empty()) throw std::invalid_argument("--snr needs --noise-dir");
  if (cond.reverberant && rir_dir.empty()) throw std::invalid_argument("--rir on needs --rir-dir");
  const NoiseBank noises = noise_dir.empty() ? NoiseBank{} : load_bank(noise_dir);
  const RirBank rirs = rir_dir.empty() ? RirBank{} : load_bank(rir_dir);
  const Waveform input = read_wav(wav);
  Rng rng = make_stream(seed, StreamTag::kEvaluation);
  write_wav(out, apply_condition(input, cond, noises, rirs, rng), WavEncoding::kFloat32);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ConvMixer keyword spotting"};
  app.require_subcommand(1);

  std::string out, data, noise, rir, config, checkpoint, wav, report_base, noise_dir, rir_dir, rir_flag = "off";
  std::string name = "convmixer";
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> train_seed;
  std::optional<int> snr;
  int per_class = 200;
  bool no_mixer = false, no_curriculum = false;
  std::vector<std::string> overrides;

  auto* synth = app.add_subcommand("synth-data", "Write the synthetic keyword corpus");
  synth->add_option("--out", out, "Output directory")->required();
  synth->add_option("--seed", seed, "Generator seed");
  synth->add_option("--per-class", per_class, "Clips per keyword");

  auto* tr = app.add_subcommand("train", "Train with the curriculum schedule");
  tr->add_option("--data", data, "Speech-Commands-style root")->required();
  tr->add_option("--noise", noise, "Noise bank directory")->required();
  tr->add_option("--rir", rir, "RIR bank directory")->required();
  tr->add_option("--config", config, "key = value config file");
  tr->add_option("--out", out, "Run directory")->required();
  tr->add_flag("--no-mixer", no_mixer, "Drop the mixer layers");
  tr->add_flag("--no-curriculum", no_curriculum, "Train on the hardest mix from epoch 1");
  tr->add_option("--seed", train_seed, "Overrides train.seed");
  tr->add_option("--set", overrides, "key=value override (repeatable)");

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  ev->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  ev->add_option("--data", data, "Speech-Commands-style root")->required();
  ev->add_option("--noise", noise, "Noise bank directory")->required();
  ev->add_option("--rir", rir, "RIR bank directory")->required();
  ev->add_option("--seed", seed, "Evaluation seed");
  ev->add_option("--report", report_base, "Write <base>.csv and <base>.txt");
  ev->add_option("--name", name, "Model name in the report");

  auto* count = app.add_subcommand("count", "Print parameter and MAC counts");
  count->add_option("--config", config, "key = value config file");

  auto* feats = app.add_subcommand("features", "Dump the 98x64 log-Mel matrix as CSV");
  feats->add_option("--wav", wav, "Input WAV")->required();
  feats->add_option("--out", out, "Output CSV")->required();

  auto* aug = app.add_subcommand("augment", "Apply one noise/reverberation condition");
  aug->add_option("--wav", wav, "Input WAV")->required();
  aug->add_option("--snr", snr, "Target SNR in dB (omit for no noise)");
  aug->add_option("--rir", rir_flag, "on|off")->check(CLI::IsMember({"on", "off"}));
  aug->add_option("--noise-dir", noise_dir, "Noise bank directory");
  aug->add_option("--rir-dir", rir_dir, "RIR bank directory");
  aug->add_option("--seed", seed, "Draw seed");
  aug->add_option("--out", out, "Output WAV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*synth) return run_synth(out, seed, per_class);
    if (*tr) {
      for (auto& o : overrides) {
        if (o.find('=') == std::string::npos) throw std::invalid_argument("--set expects key=value, got " + o);
      }
      return run_train(data, noise, rir, config, out, no_mixer, no_curriculum, train_seed, overrides);
    }
    if (*ev) return run_eval(checkpoint, data, noise, rir, seed, report_base, name);
    if (*count) return run_count(config);
    if (*feats) return run_features(wav, out);
    if (*aug) return run_augment(wav, snr, rir_flag, noise_dir, rir_dir, seed, out);
  } catch (const std::exception& e) {
    std::cerr << "kws: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
