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

#include "kws/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "kws/trainer.hpp"
#include "parallel.hpp"

namespace kws {

Condition eval_condition(std::size_t column) {
  static constexpr int kSnr[] = {0, 20, 0, -5, -10};
  if (column >= kNumEvalColumns) throw std::out_of_range("eval_condition: column out of range");
  if (column == 0) return Condition::clean();
  return Condition::noisy(kSnr[column], true);
}

std::vector<float> evaluate_logits(const LogitsFn& fn, const EvalData& data, const Condition& cond,
                                   std::uint64_t seed, const FrontendConfig& frontend) {
  if (data.entries.empty()) throw std::invalid_argument("evaluate: empty test split");
  constexpr std::size_t kChunk = 64;
  std::vector<float> out;
  out.reserve(data.entries.size() * kNumClasses);
  for (std::size_t start = 0; start < data.entries.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, data.entries.size() - start);
    std::vector<FeatureMatrix> feats(n);
    detail::parallel_for(n, [&](std::size_t i) {
      Rng rng = make_stream(seed, StreamTag::kEvaluation, {start + i});
      const Waveform raw = data.loader.load(data.entries[start + i], rng);
      feats[i] = prepare_features(raw, cond, data.noises, data.rirs, rng, frontend, nullptr);
    });
    const Tensor logits = fn(pack_features(feats));
    if (logits.rank() != 2 || logits.dim(0) != n) throw std::logic_error("evaluate: logits shape mismatch");
    const auto z = logits.data();
    out.insert(out.end(), z.begin(), z.end());
  }
  return out;
}

double top1_accuracy(const std::vector<float>& logits, std::size_t classes, const std::vector<int>& labels) {
  if (labels.empty() || logits.size() != labels.size() * classes) {
    throw std::invalid_argument("top1_accuracy: logits do not match labels");
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto row = logits.begin() + static_cast<std::ptrdiff_t>(i * classes);
    if (std::max_element(row, row + static_cast<std::ptrdiff_t>(classes)) - row == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double evaluate(const LogitsFn& fn, const EvalData& data, const Condition& cond, std::uint64_t seed,
                const FrontendConfig& frontend) {
  const auto logits = evaluate_logits(fn, data, cond, seed, frontend);
  std::vector<int> labels;
  labels.reserve(data.entries.size());
  for (const auto& e : data.entries) labels.push_back(e.label);
  return top1_accuracy(logits, logits.size() / labels.size(), labels);
}

LogitsFn model_logits(ConvMixerModel& model) {
  return [&model](const Tensor& x) {
    Tape tape(false);
    return forward(tape, model, x, ops::Mode::kEval);
  };
}

void EvalResult::validate() const {
  for (auto column : kEvalColumns) {
    const auto it = accuracy.find(std::string(column));
    if (it == accuracy.end()) throw std::invalid_argument("eval result: missing column " + std::string(column));
    if (!(it->second >= 0.0 && it->second <= 1.0)) {
      throw std::invalid_argument("eval result: accuracy out of range for " + std::string(column));
    }
  }
}

EvalResult evaluate_matrix(ConvMixerModel& model, const DatasetManifest& manifest, const NoiseBank& noises,
                           const RirBank& rirs, std::uint64_t seed, const FrontendConfig& frontend) {
  const auto entries = manifest.split(Split::kTest);
  const ClipLoader loader(manifest);
  const EvalData data{entries, loader, noises, rirs};
  const LogitsFn fn = model_logits(model);
  EvalResult result;
  result.params = count_params(model);
  result.macs = count_macs(model);
  for (std::size_t c = 0; c < kNumEvalColumns; ++c) {
    const std::string name(kEvalColumns[c]);
    result.accuracy[name] = evaluate(fn, data, eval_condition(c), seed, frontend);
    result.n_samples[name] = entries.size();
  }
  return result;
}

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace

std::string report_csv(const std::vector<EvalResult>& results) {
  std::string out = "model,params_k,macs_m";
  for (auto c : kEvalColumns) out += "," + std::string(c);
  out += "\n";
  for (const auto& r : results) {
    r.validate();
    out += r.model + "," + fmt("%.1f", static_cast<double>(r.params) / 1e3) + "," +
           fmt("%.2f", static_cast<double>(r.macs) / 1e6);
    for (auto c : kEvalColumns) out += "," + fmt("%.2f", 100.0 * r.accuracy.at(std::string(c)));
    out += "\n";
  }
  return out;
}

std::string report_table(const std::vector<EvalResult>& results) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"Model", "Params (K)", "MACs (M)"});
  for (auto c : kEvalColumns) rows.front().emplace_back(c);
  for (const auto& r : results) {
    r.validate();
    std::vector<std::string> row = {r.model, fmt("%.1f", static_cast<double>(r.params) / 1e3),
                                    fmt("%.2f", static_cast<double>(r.macs) / 1e6)};
    for (auto c : kEvalColumns) row.push_back(fmt("%.2f", 100.0 * r.accuracy.at(std::string(c))));
    rows.push_back(std::move(row));
  }
  std::vector<std::size_t> width(rows.front().size(), 0);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  std::string out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t i = 0; i < rows[r].size(); ++i) {
      const std::string& cell = rows[r][i];
      const std::string pad(width[i] - cell.size(), ' ');
      if (i) out += "  ";
      out += i == 0 ? cell + pad : pad + cell;  // names left, numbers right
    }
    out += "\n";
    if (r == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w;
      out += std::string(total + 2 * (width.size() - 1), '-') + "\n";
    }
  }
  return out;
}

void report(const std::vector<EvalResult>& results, const std::filesystem::path& base) {
  const auto write = [](const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("report: cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("report: write failed for " + path.string());
  };
  const std::string csv = report_csv(results);
  const std::string table = report_table(results);
  std::filesystem::path csv_path = base, txt_path = base;
  write(csv_path.replace_extension(".csv"), csv);
  write(txt_path.replace_extension(".txt"), table);
}

}  // namespace kws
