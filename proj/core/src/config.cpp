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

#include "kws/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace kws {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw std::invalid_argument("config: bad value '" + value + "' for " + key);
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v);
  return out;
}

long to_long(const std::string& key, const std::string& v) {
  long out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v);
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) bad_value(key, v);
    return d;
  } catch (const std::logic_error&) {
    bad_value(key, v);
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  bad_value(key, v);
}

std::string fmt_double(double d) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", d);
  return buf;
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

struct Field {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define KWS_SIZE_FIELD(KEY, MEMBER)                                              \
  Field {                                                                        \
    KEY, [](RunConfig& c, const std::string& v) { c.MEMBER = to_size(KEY, v); }, \
        [](const RunConfig& c) { return std::to_string(c.MEMBER); }            \
  }
#define KWS_INT_FIELD(KEY, MEMBER)                                                                 \
  Field {                                                                                          \
    KEY, [](RunConfig& c, const std::string& v) { c.MEMBER = static_cast<int>(to_long(KEY, v)); }, \
        [](const RunConfig& c) { return std::to_string(c.MEMBER); }                              \
  }
#define KWS_DOUBLE_FIELD(KEY, MEMBER)                                              \
  Field {                                                                          \
    KEY, [](RunConfig& c, const std::string& v) { c.MEMBER = to_double(KEY, v); }, \
        [](const RunConfig& c) { return fmt_double(c.MEMBER); }                  \
  }
#define KWS_BOOL_FIELD(KEY, MEMBER)                                              \
  Field {                                                                        \
    KEY, [](RunConfig& c, const std::string& v) { c.MEMBER = to_bool(KEY, v); }, \
        [](const RunConfig& c) { return fmt_bool(c.MEMBER); }                  \
  }

const std::vector<Field>& model_fields() {
  static const std::vector<Field> fields = {
      KWS_SIZE_FIELD("model.n_mels", model.n_mels),
      KWS_SIZE_FIELD("model.n_frames", model.n_frames),
      KWS_SIZE_FIELD("model.n_blocks", model.n_blocks),
      KWS_SIZE_FIELD("model.channels", model.channels),
      KWS_SIZE_FIELD("model.kernel_pre", model.kernel_pre),
      KWS_SIZE_FIELD("model.kernel_block_1d", model.kernel_block_1d),
      Field{"model.kernel_block_2d",
            [](RunConfig& c, const std::string& v) {
              const auto x = v.find_first_of("x,");
              if (x == std::string::npos) {
                c.model.kernel_block_2d_freq = c.model.kernel_block_2d_time =
                    to_size("model.kernel_block_2d", v);
              } else {
                c.model.kernel_block_2d_freq = to_size("model.kernel_block_2d", trim(v.substr(0, x)));
                c.model.kernel_block_2d_time = to_size("model.kernel_block_2d", trim(v.substr(x + 1)));
              }
            },
            [](const RunConfig& c) {
              return std::to_string(c.model.kernel_block_2d_freq) + "x" +
                     std::to_string(c.model.kernel_block_2d_time);
            }},
      KWS_SIZE_FIELD("model.depth", model.depth),
      KWS_SIZE_FIELD("model.kernel_post", model.kernel_post),
      KWS_SIZE_FIELD("model.mixer_hidden_t", model.mixer_hidden_t),
      KWS_SIZE_FIELD("model.mixer_hidden_f", model.mixer_hidden_f),
      KWS_BOOL_FIELD("mixer.enabled", model.mixer_enabled),
      KWS_SIZE_FIELD("model.n_classes", model.n_classes),
  };
  return fields;
}

const std::vector<Field>& other_fields() {
  static const std::vector<Field> fields = {
      KWS_SIZE_FIELD("train.batch_size", train.batch_size),
      KWS_DOUBLE_FIELD("train.base_lr", train.base_lr),
      KWS_DOUBLE_FIELD("train.lr_decay", train.lr_decay),
      KWS_INT_FIELD("train.decay_interval", train.decay_interval),
      KWS_INT_FIELD("train.decay_start_epoch", train.decay_start_epoch),
      KWS_INT_FIELD("epochs.max", train.max_epochs),
      KWS_INT_FIELD("epochs.per_stage", train.epochs_per_stage),
      KWS_INT_FIELD("train.patience", train.patience),
      KWS_DOUBLE_FIELD("mixup.alpha", train.mixup_alpha),
      KWS_BOOL_FIELD("mixup.enabled", train.mixup),
      KWS_BOOL_FIELD("specaugment.enabled", train.spec_augment),
      KWS_SIZE_FIELD("specaugment.max_width", train.spec_mask_max),
      KWS_BOOL_FIELD("timeshift.enabled", train.time_shift),
      Field{"timeshift.max_samples",
            [](RunConfig& c, const std::string& v) { c.train.time_shift_max = to_long("timeshift.max_samples", v); },
            [](const RunConfig& c) { return std::to_string(c.train.time_shift_max); }},
      KWS_BOOL_FIELD("curriculum.enabled", train.curriculum),
      Field{"train.seed",
            [](RunConfig& c, const std::string& v) { c.train.seed = to_size("train.seed", v); },
            [](const RunConfig& c) { return std::to_string(c.train.seed); }},
      KWS_DOUBLE_FIELD("frontend.window_ms", frontend.window_ms),
      KWS_DOUBLE_FIELD("frontend.hop_ms", frontend.hop_ms),
      KWS_SIZE_FIELD("frontend.n_fft", frontend.n_fft),
      KWS_DOUBLE_FIELD("frontend.fmin", frontend.fmin),
      KWS_DOUBLE_FIELD("frontend.fmax", frontend.fmax),
      KWS_DOUBLE_FIELD("frontend.log_floor", frontend.log_floor),
  };
  return fields;
}

#undef KWS_SIZE_FIELD
#undef KWS_INT_FIELD
#undef KWS_DOUBLE_FIELD
#undef KWS_BOOL_FIELD

}  // namespace

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config: line " + std::to_string(lineno) + " is not key = value");
    }
    kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str());
}

std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

void apply_key_values(RunConfig& cfg, const KeyValues& kv) {
  for (const auto& [key, value] : kv) {
    bool found = false;
    for (const auto* fields : {&model_fields(), &other_fields()}) {
      for (const auto& f : *fields) {
        if (f.key == key) {
          f.set(cfg, value);
          found = true;
        }
      }
    }
    if (!found) throw std::invalid_argument("config: unknown key '" + key + "'");
  }
}

KeyValues model_key_values(const ModelConfig& cfg) {
  RunConfig rc;
  rc.model = cfg;
  KeyValues kv;
  for (const auto& f : model_fields()) kv[f.key] = f.get(rc);
  return kv;
}

KeyValues to_key_values(const RunConfig& cfg) {
  KeyValues kv;
  for (const auto* fields : {&model_fields(), &other_fields()}) {
    for (const auto& f : *fields) kv[f.key] = f.get(cfg);
  }
  return kv;
}

ModelConfig model_config_from_text(const std::string& text) {
  RunConfig rc;
  apply_key_values(rc, parse_key_values(text));
  rc.model.validate();
  return rc.model;
}

std::string model_config_to_text(const ModelConfig& cfg) {
  return format_key_values(model_key_values(cfg));
}

}  // namespace kws
