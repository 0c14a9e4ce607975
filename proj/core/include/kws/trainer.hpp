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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "kws/audio_io.hpp"
#include "kws/augment.hpp"
#include "kws/frontend.hpp"
#include "kws/model.hpp"

namespace kws {

struct TrainConfig {
  std::size_t batch_size = 128;
  double base_lr = 6e-3;
  double lr_decay = 0.85;
  int decay_interval = 4;
  int decay_start_epoch = 5;
  int max_epochs = 200;  // global across stages
  int epochs_per_stage = 0;  // 0: no cap; ignored without the curriculum
  int patience = 10;
  double mixup_alpha = 0.5;
  bool mixup = true;
  bool spec_augment = true;
  std::size_t spec_mask_max = 25;
  bool time_shift = true;
  long time_shift_max = 1600;
  bool curriculum = true;  // false: one run on the stage-4 mix
  std::uint64_t seed = 0;

  void validate() const;
};

/// lr = base * decay^k, k = max(0, floor((epoch - start) / interval));
/// epochs are 1-based and counted globally.
double lr_at_epoch(int epoch, const TrainConfig& cfg);

// ---------------------------------------------------------------- Adam

struct OptimizerState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<float>> m;
  std::vector<std::vector<float>> v;
};

OptimizerState make_optimizer_state(const Named<float>& params);

enum class StepStatus { kApplied, kNonFiniteGradient };

/// Bias-corrected Adam over the tensors' accumulated gradients. A non-finite
/// gradient anywhere leaves every parameter and moment untouched.
StepStatus adam_step(const Named<float>& params, OptimizerState& state, double lr);

// ---------------------------------------------------------- curriculum

/// Min-max normalization of the last element against the whole history;
/// 0 for a single element or a flat history.
double minmax_norm(std::span<const double> history);

enum class Decision { kContinue, kSaveBest, kAdvanceStage, kFinish };
std::string_view decision_name(Decision d);

struct CurriculumState {
  int stage = 0;
  int final_stage = kNumStages;  // training ends when stage reaches this
  int epoch_in_stage = 0;
  std::vector<double> acc_history;
  std::vector<double> loss_history;
  double bst_crit = 0.0;
  int epochs_since_best = 0;
  int patience = 10;
  std::string best_checkpoint_path;

  /// Appends one epoch of validation metrics.
  void record(double acc, double loss);
};

/// Norm(acc_m) - Norm(loss_m) over the current stage's histories.
double progress_criterion(const CurriculumState& state);

/// c >= bst_crit saves and resets patience (ties included); otherwise the
/// patience counter grows, and on reaching `patience` the stage advances
/// with fresh histories, bst_crit = 0 and counters reset.
Decision curriculum_update(CurriculumState& state, double c);

/// Moves to the next stage regardless of patience (per-stage epoch cap).
Decision force_advance(CurriculumState& state);

// ------------------------------------------------------------ training

struct EpochRecord {
  int epoch = 0;
  int stage = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double c = 0.0;
  double bst_crit = 0.0;
  std::string event;  // none | save | advance
};

std::string metrics_csv(const std::vector<EpochRecord>& log);

struct TrainOptions {
  std::filesystem::path out_dir;  // best.ckpt and metrics.csv; empty: no files
  std::ostream* progress = nullptr;
};

struct TrainResult {
  ConvMixerModel model;
  std::vector<EpochRecord> log;
  int stage_advances = 0;
};

struct DataBundle {
  const DatasetManifest& manifest;
  const NoiseBank& noises;
  const RirBank& rirs;
};

/// Raw clip -> 1 s -> condition -> (train: time shift) -> log-Mel ->
/// (train: SpecAugment). Clips with a silent active region skip the noise.
FeatureMatrix prepare_features(const Waveform& raw, const Condition& cond, const NoiseBank& noises,
                               const RirBank& rirs, Rng& rng, const FrontendConfig& frontend,
                               const TrainConfig* train_aug);

/// Packs feature matrices into a (B, frames, mels) tensor.
Tensor pack_features(std::span<const FeatureMatrix> batch);

/// Curriculum multi-condition training. Deterministic given train_cfg.seed.
TrainResult train(const DataBundle& data, const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                  const FrontendConfig& frontend = {}, const TrainOptions& options = {});

class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace kws
