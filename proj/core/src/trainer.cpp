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

#include "kws/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "kws/checkpoint.hpp"
#include "parallel.hpp"

namespace kws {

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("train config: ") + what);
  };
  require(batch_size >= 2, "batch_size must be >= 2");
  require(base_lr > 0.0, "base_lr must be positive");
  require(lr_decay > 0.0, "lr_decay must be positive");
  require(decay_interval > 0, "decay_interval must be positive");
  require(decay_start_epoch > 0, "decay_start_epoch must be positive");
  require(max_epochs > 0, "max_epochs must be positive");
  require(epochs_per_stage >= 0, "epochs_per_stage must be >= 0");
  require(patience > 0, "patience must be positive");
  require(mixup_alpha > 0.0, "mixup alpha must be positive");
  require(time_shift_max >= 0, "time shift must be >= 0");
}

double lr_at_epoch(int epoch, const TrainConfig& cfg) {
  if (epoch < 1) throw std::invalid_argument("lr_at_epoch: epochs are 1-based");
  const int k = epoch < cfg.decay_start_epoch ? 0 : (epoch - cfg.decay_start_epoch) / cfg.decay_interval;
  return cfg.base_lr * std::pow(cfg.lr_decay, k);
}

OptimizerState make_optimizer_state(const Named<float>& params) {
  OptimizerState s;
  for (const auto& [name, t] : params) {
    s.m.emplace_back(t.size(), 0.0f);
    s.v.emplace_back(t.size(), 0.0f);
  }
  return s;
}

StepStatus adam_step(const Named<float>& params, OptimizerState& state, double lr) {
  if (params.size() != state.m.size()) {
    throw std::invalid_argument("adam_step: optimizer state does not match parameters");
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (params[p].second.size() != state.m[p].size()) {
      throw std::invalid_argument("adam_step: moment shape mismatch for " + params[p].first);
    }
    for (float g : params[p].second.grad()) {
      if (!std::isfinite(g)) return StepStatus::kNonFiniteGradient;
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor param = params[p].second;
    auto values = param.data();
    auto grad = param.grad();
    auto& m = state.m[p];
    auto& v = state.v[p];
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grad[i];
      const double mi = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      const double vi = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      values[i] = static_cast<float>(values[i] - lr * (mi / bc1) / (std::sqrt(vi / bc2) + state.eps));
    }
  }
  return StepStatus::kApplied;
}

double minmax_norm(std::span<const double> history) {
  if (history.empty()) throw std::invalid_argument("minmax_norm: empty history");
  if (history.size() == 1) return 0.0;
  const auto [lo, hi] = std::minmax_element(history.begin(), history.end());
  if (*hi == *lo) return 0.0;
  return (history.back() - *lo) / (*hi - *lo);
}

std::string_view decision_name(Decision d) {
  switch (d) {
    case Decision::kContinue: return "continue";
    case Decision::kSaveBest: return "save_best";
    case Decision::kAdvanceStage: return "advance_stage";
    case Decision::kFinish: return "finish";
  }
  return "?";
}

void CurriculumState::record(double acc, double loss) {
  acc_history.push_back(acc);
  loss_history.push_back(loss);
  ++epoch_in_stage;
}

double progress_criterion(const CurriculumState& state) {
  if (state.acc_history.empty() || state.loss_history.empty()) {
    throw std::invalid_argument("progress_criterion: empty histories");
  }
  if (state.acc_history.size() != state.loss_history.size()) {
    throw std::invalid_argument("progress_criterion: history lengths differ");
  }
  return minmax_norm(state.acc_history) - minmax_norm(state.loss_history);
}

Decision force_advance(CurriculumState& state) {
  ++state.stage;
  state.acc_history.clear();
  state.loss_history.clear();
  state.bst_crit = 0.0;
  state.epochs_since_best = 0;
  state.epoch_in_stage = 0;
  return state.stage >= state.final_stage ? Decision::kFinish : Decision::kAdvanceStage;
}

Decision curriculum_update(CurriculumState& state, double c) {
  if (c >= state.bst_crit) {
    state.bst_crit = std::max(state.bst_crit, c);
    state.epochs_since_best = 0;
    return Decision::kSaveBest;
  }
  if (++state.epochs_since_best >= state.patience) return force_advance(state);
  return Decision::kContinue;
}

std::string metrics_csv(const std::vector<EpochRecord>& log) {
  std::string out = "epoch,stage,lr,train_loss,val_loss,val_acc,c,bst_crit,event\n";
  char buf[256];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.6e,%.6f,%.6f,%.6f,%.6f,%.6f,%s\n", r.epoch, r.stage, r.lr,
                  r.train_loss, r.val_loss, r.val_acc, r.c, r.bst_crit, r.event.c_str());
    out += buf;
  }
  return out;
}

FeatureMatrix prepare_features(const Waveform& raw, const Condition& cond, const NoiseBank& noises,
                               const RirBank& rirs, Rng& rng, const FrontendConfig& frontend,
                               const TrainConfig* train_aug) {
  const std::size_t active = std::min(raw.size(), kClipSamples);
  Waveform wave = pad_or_trim(raw);
  Condition effective = cond;
  if (effective.snr_db && mean_power(wave, active) == 0.0) effective.snr_db.reset();
  wave = apply_condition(wave, effective, noises, rirs, rng, active);
  if (train_aug && train_aug->time_shift) wave = time_shift(wave, rng, train_aug->time_shift_max);
  FeatureMatrix f = log_mel_fbank(wave, frontend);
  if (train_aug && train_aug->spec_augment) {
    f = spec_augment(f, rng, train_aug->spec_mask_max, train_aug->spec_mask_max);
  }
  return f;
}

Tensor pack_features(std::span<const FeatureMatrix> batch) {
  if (batch.empty()) throw std::invalid_argument("pack_features: empty batch");
  const std::size_t t = batch[0].frames, f = batch[0].bins;
  Tensor x({batch.size(), t, f});
  auto dst = x.data();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i].frames != t || batch[i].bins != f) throw std::invalid_argument("pack_features: ragged batch");
    std::copy(batch[i].values.begin(), batch[i].values.end(), dst.begin() + static_cast<std::ptrdiff_t>(i * t * f));
  }
  return x;
}

namespace {

template <typename Item>
void shuffle(std::vector<Item>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<long>(i) - 1));
    std::swap(items[i - 1], items[j]);
  }
}

// Command words and silence as-is; unknown subsampled to the mean
// per-command-word count.
std::vector<ManifestEntry> epoch_order(const std::vector<ManifestEntry>& train, std::uint64_t seed, int epoch) {
  Rng rng = make_stream(seed, StreamTag::kEpochOrder, {static_cast<std::uint64_t>(epoch)});
  std::vector<ManifestEntry> out, unknown;
  std::array<std::size_t, kNumCommandWords> per_word{};
  for (const auto& e : train) {
    if (e.label == kUnknownLabel) {
      unknown.push_back(e);
    } else {
      out.push_back(e);
      if (e.label < kNumCommandWords) ++per_word[static_cast<std::size_t>(e.label)];
    }
  }
  std::size_t total = 0, present = 0;
  for (auto n : per_word) {
    total += n;
    if (n) ++present;
  }
  const std::size_t unknown_count = present ? (total + present / 2) / present : unknown.size();
  shuffle(unknown, rng);
  unknown.resize(std::min(unknown.size(), unknown_count));
  out.insert(out.end(), unknown.begin(), unknown.end());
  shuffle(out, rng);
  return out;
}

std::vector<float> one_hot(int label) {
  std::vector<float> t(kNumClasses, 0.0f);
  t[static_cast<std::size_t>(label)] = 1.0f;
  return t;
}

struct ValidationResult {
  double accuracy = 0.0;
  double loss = 0.0;
};

ValidationResult validate(ConvMixerModel& model, const std::vector<ManifestEntry>& entries, const ClipLoader& loader,
                          const ConditionSet& set, const DataBundle& data, const FrontendConfig& frontend,
                          std::uint64_t seed) {
  constexpr std::size_t kChunk = 64;
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < entries.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, entries.size() - start);
    std::vector<FeatureMatrix> feats(n);
    detail::parallel_for(n, [&](std::size_t i) {
      Rng rng = make_stream(seed, StreamTag::kValidation, {start + i});
      const Waveform raw = loader.load(entries[start + i], rng);
      const Condition cond = sample_condition(set, rng);
      feats[i] = prepare_features(raw, cond, data.noises, data.rirs, rng, frontend, nullptr);
    });
    Tensor targets({n, static_cast<std::size_t>(kNumClasses)});
    for (std::size_t i = 0; i < n; ++i) {
      targets.data()[i * kNumClasses + static_cast<std::size_t>(entries[start + i].label)] = 1.0f;
    }
    Tape tape(false);
    Tensor logits = forward(tape, model, pack_features(feats), ops::Mode::kEval);
    loss_sum += static_cast<double>(ops::bce_with_logits(tape, logits, targets).item()) * static_cast<double>(n);
    const auto z = logits.data();
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = z.subspan(i * kNumClasses, kNumClasses);
      const auto best = std::max_element(row.begin(), row.end()) - row.begin();
      if (best == entries[start + i].label) ++correct;
    }
  }
  return {static_cast<double>(correct) / static_cast<double>(entries.size()),
          loss_sum / static_cast<double>(entries.size())};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

TrainResult train(const DataBundle& data, const ModelConfig& model_cfg, const TrainConfig& cfg,
                  const FrontendConfig& frontend, const TrainOptions& options) {
  cfg.validate();
  model_cfg.validate();
  frontend.validate();
  const auto train_entries = data.manifest.split(Split::kTrain);
  const auto val_entries = data.manifest.split(Split::kValidation);
  if (train_entries.empty()) throw std::invalid_argument("train: empty training split");
  if (val_entries.empty()) throw std::invalid_argument("train: empty validation split");
  if (!options.out_dir.empty()) std::filesystem::create_directories(options.out_dir);

  TrainResult result;
  result.model = build_model(model_cfg, cfg.seed);
  ConvMixerModel& model = result.model;
  const Named<float> params = model.parameters();
  OptimizerState opt = make_optimizer_state(params);
  const ClipLoader loader(data.manifest);

  CurriculumState state;
  state.patience = cfg.patience;
  if (!cfg.curriculum) state.stage = kNumStages - 1;
  if (!options.out_dir.empty()) state.best_checkpoint_path = (options.out_dir / "best.ckpt").string();
  std::string best = serialize_checkpoint(model);

  auto restore_best = [&]() { copy_state(deserialize_checkpoint(best), model); };
  auto abort = [&](const std::string& why) {
    if (!options.out_dir.empty()) {
      write_text(options.out_dir / "abort_state.txt",
                 why + "\nstage=" + std::to_string(state.stage) + "\nbst_crit=" + std::to_string(state.bst_crit) +
                     "\nepochs_since_best=" + std::to_string(state.epochs_since_best) + "\n" +
                     metrics_csv(result.log));
    }
    throw TrainingAborted("train: " + why);
  };

  bool finished = false;
  for (int epoch = 1; epoch <= cfg.max_epochs && !finished; ++epoch) {
    const int stage = state.stage;
    const ConditionSet conditions = stage_conditions(stage);
    const double lr = lr_at_epoch(epoch, cfg);
    const auto order = epoch_order(train_entries, cfg.seed, epoch);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start + 2 <= order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      if (n < 2) break;
      std::vector<FeatureMatrix> feats(n);
      detail::parallel_for(n, [&](std::size_t i) {
        Rng rng = make_stream(cfg.seed, StreamTag::kTrainSample,
                              {static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(start + i)});
        const Waveform raw = loader.load(order[start + i], rng);
        const Condition cond = sample_condition(conditions, rng);
        feats[i] = prepare_features(raw, cond, data.noises, data.rirs, rng, frontend, &cfg);
      });
      Tensor targets({n, static_cast<std::size_t>(kNumClasses)});
      for (std::size_t i = 0; i < n; ++i) {
        targets.data()[i * kNumClasses + static_cast<std::size_t>(order[start + i].label)] = 1.0f;
      }
      if (cfg.mixup) {
        Rng rng = make_stream(cfg.seed, StreamTag::kTrainBatch,
                              {static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(start)});
        std::vector<std::size_t> partner(n);
        for (std::size_t i = 0; i < n; ++i) partner[i] = i;
        shuffle(partner, rng);
        std::vector<FeatureMatrix> mixed(n);
        Tensor mixed_targets({n, static_cast<std::size_t>(kNumClasses)});
        const auto t = targets.data();
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t j = partner[i];
          auto r = mixup(feats[i], feats[j], t.subspan(i * kNumClasses, kNumClasses),
                         t.subspan(j * kNumClasses, kNumClasses), rng, cfg.mixup_alpha);
          mixed[i] = std::move(r.features);
          std::copy(r.target.begin(), r.target.end(),
                    mixed_targets.data().begin() + static_cast<std::ptrdiff_t>(i * kNumClasses));
        }
        feats = std::move(mixed);
        targets = mixed_targets;
      }

      for (const auto& [name, p] : params) BasicTensor<float>(p).zero_grad();
      Tape tape;
      Tensor logits = forward(tape, model, pack_features(feats), ops::Mode::kTrain);
      Tensor loss = ops::bce_with_logits(tape, logits, targets);
      const double loss_value = loss.item();
      if (!std::isfinite(loss_value)) {
        abort("non-finite loss at epoch " + std::to_string(epoch) + ", batch starting at " + std::to_string(start));
      }
      tape.backward(loss);
      if (adam_step(params, opt, lr) != StepStatus::kApplied) {
        abort("non-finite gradient at epoch " + std::to_string(epoch) + ", batch starting at " +
              std::to_string(start));
      }
      loss_sum += loss_value;
      ++batches;
    }

    const auto val = validate(model, val_entries, loader, conditions, data, frontend, cfg.seed);
    state.record(val.accuracy, val.loss);
    const double c = progress_criterion(state);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.stage = stage;
    rec.lr = lr;
    rec.train_loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
    rec.val_loss = val.loss;
    rec.val_acc = val.accuracy;
    rec.c = c;
    rec.bst_crit = std::max(state.bst_crit, c);

    Decision decision = curriculum_update(state, c);
    // The per-stage cap only shapes the curriculum; a single-stage run uses
    // the whole epoch budget.
    const bool capped = cfg.curriculum && cfg.epochs_per_stage > 0 && state.epoch_in_stage >= cfg.epochs_per_stage;
    if (decision == Decision::kSaveBest) {
      best = serialize_checkpoint(model);
      if (!state.best_checkpoint_path.empty()) save_checkpoint(model, state.best_checkpoint_path);
      rec.event = "save";
      if (capped) decision = force_advance(state);
    } else if (decision == Decision::kContinue) {
      rec.event = "none";
      if (capped) decision = force_advance(state);
    }
    if (decision == Decision::kAdvanceStage) {
      restore_best();
      rec.event = "advance";
      ++result.stage_advances;
    } else if (decision == Decision::kFinish) {
      restore_best();
      if (rec.event.empty()) rec.event = "none";
      finished = true;
    }
    result.log.push_back(rec);

    if (options.progress) {
      char buf[256];
      std::snprintf(buf, sizeof buf,
                    "epoch %3d stage %d lr %.3e train_loss %.4f val_loss %.4f val_acc %.4f c %+.3f %s\n", epoch,
                    stage, lr, rec.train_loss, rec.val_loss, rec.val_acc, c, std::string(decision_name(decision)).c_str());
      *options.progress << buf << std::flush;
    }
    if (!options.out_dir.empty()) write_text(options.out_dir / "metrics.csv", metrics_csv(result.log));
  }
  if (!finished) restore_best();
  if (!state.best_checkpoint_path.empty()) save_checkpoint(model, state.best_checkpoint_path);
  return result;
}

}  // namespace kws
