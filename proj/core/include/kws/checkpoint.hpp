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
#include <string>
#include <string_view>

#include "kws/model.hpp"

namespace kws {

/// Binary layout (all integers little-endian):
///   "CMKW" | u32 version=1 | u32 tensor count |
///   per tensor: u16 name length, UTF-8 name, u8 rank, u32 extents[rank],
///               f32 payload
/// Parameters come first, then BatchNorm running statistics, then an entry
/// named "__config__" holding the key = value model config, one byte per
/// f32 element.
inline constexpr std::string_view kCheckpointMagic = "CMKW";
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::string_view kConfigEntryName = "__config__";

std::string serialize_checkpoint(const ConvMixerModel& model);
ConvMixerModel deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const ConvMixerModel& model, const std::filesystem::path& path);
ConvMixerModel load_checkpoint(const std::filesystem::path& path);

}  // namespace kws
