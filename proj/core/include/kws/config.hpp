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

#include <filesystem>
#include <map>
#include <string>

#include "kws/frontend.hpp"
#include "kws/model.hpp"
#include "kws/trainer.hpp"

namespace kws {

/// Flat "key = value" settings. Blank lines and lines starting with '#' are
/// ignored.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(const std::string& text);
KeyValues read_key_values(const std::filesystem::path& path);
std::string format_key_values(const KeyValues& kv);

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  FrontendConfig frontend;
};

/// Applies every recognized key; throws std::invalid_argument on an unknown
/// key or a malformed value.
void apply_key_values(RunConfig& cfg, const KeyValues& kv);

KeyValues model_key_values(const ModelConfig& cfg);
KeyValues to_key_values(const RunConfig& cfg);

ModelConfig model_config_from_text(const std::string& text);
std::string model_config_to_text(const ModelConfig& cfg);

}  // namespace kws
