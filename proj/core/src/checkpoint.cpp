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

#include "kws/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "kws/config.hpp"

namespace kws {
namespace {

void put_u8(std::string& out, std::uint8_t v) { out.push_back(static_cast<char>(v)); }
void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}
void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_f32(std::string& out, float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, sizeof u);
  put_u32(out, u);
}

void put_entry(std::string& out, const std::string& name, const Shape& shape,
               std::span<const float> values) {
  if (name.size() > 0xffff) throw std::invalid_argument("checkpoint: tensor name too long");
  put_u16(out, static_cast<std::uint16_t>(name.size()));
  out += name;
  put_u8(out, static_cast<std::uint8_t>(shape.size()));
  for (auto e : shape) put_u32(out, static_cast<std::uint32_t>(e));
  for (float v : values) put_f32(out, v);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  const unsigned char* take(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw std::runtime_error("checkpoint: truncated file");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes_.data() + pos_);
    pos_ += n;
    return p;
  }
  std::uint8_t u8() { return *take(1); }
  std::uint16_t u16() {
    const auto* p = take(2);
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  }
  std::uint32_t u32() {
    const auto* p = take(4);
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  }
  float f32() {
    const std::uint32_t u = u32();
    float f;
    std::memcpy(&f, &u, sizeof f);
    return f;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

struct Entry {
  Shape shape;
  std::vector<float> values;
};

}  // namespace

std::string serialize_checkpoint(const ConvMixerModel& model) {
  const auto state = model.state();
  const std::string config = model_config_to_text(model.config);
  std::string out;
  out += kCheckpointMagic;
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(state.size() + 1));
  for (const auto& [name, t] : state) put_entry(out, name, t.shape(), t.data());
  std::vector<float> text(config.begin(), config.end());
  for (std::size_t i = 0; i < config.size(); ++i) {
    text[i] = static_cast<float>(static_cast<unsigned char>(config[i]));
  }
  put_entry(out, std::string(kConfigEntryName), {text.size()}, text);
  return out;
}

ConvMixerModel deserialize_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  const auto* magic = r.take(4);
  if (std::memcmp(magic, kCheckpointMagic.data(), 4) != 0) {
    throw std::runtime_error("checkpoint: bad magic (not a CMKW file)");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  std::map<std::string, Entry> entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t len = r.u16();
    const auto* name_bytes = r.take(len);
    std::string name(reinterpret_cast<const char*>(name_bytes), len);
    Entry e;
    const std::uint8_t rank = r.u8();
    for (std::uint8_t k = 0; k < rank; ++k) e.shape.push_back(r.u32());
    const std::size_t n = numel(e.shape);
    if (n > bytes.size()) throw std::runtime_error("checkpoint: truncated file");
    e.values.resize(n);
    for (auto& v : e.values) v = r.f32();
    if (!entries.emplace(name, std::move(e)).second) {
      throw std::runtime_error("checkpoint: duplicate tensor " + name);
    }
  }
  if (!r.done()) throw std::runtime_error("checkpoint: trailing bytes");

  auto cfg_it = entries.find(std::string(kConfigEntryName));
  if (cfg_it == entries.end()) throw std::runtime_error("checkpoint: missing config entry");
  std::string text;
  for (float v : cfg_it->second.values) text.push_back(static_cast<char>(static_cast<unsigned char>(v)));
  ModelConfig cfg = model_config_from_text(text);

  Rng rng(0);
  ConvMixerModel model = build_model<float>(cfg, rng);
  const auto state = model.state();
  if (state.size() + 1 != entries.size()) {
    throw std::runtime_error("checkpoint: tensor count " + std::to_string(entries.size() - 1) +
                             " does not match config (" + std::to_string(state.size()) + ")");
  }
  for (const auto& [name, t] : state) {
    auto it = entries.find(name);
    if (it == entries.end()) throw std::runtime_error("checkpoint: missing tensor " + name);
    if (it->second.shape != t.shape()) {
      throw std::runtime_error("checkpoint: shape mismatch for " + name + ": file " +
                               shape_string(it->second.shape) + ", config " + shape_string(t.shape()));
    }
    auto dst = BasicTensor<float>(t).data();
    std::copy(it->second.values.begin(), it->second.values.end(), dst.begin());
  }
  return model;
}

void save_checkpoint(const ConvMixerModel& model, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path.string());
}

ConvMixerModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace kws
