// Copyright 2026 The s2t Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "s2t/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "s2t/binary_io.hpp"
#include "s2t/errors.hpp"

namespace s2t {

namespace {

constexpr char kMagic[8] = {'S', '2', 'T', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint8_t kFloat32 = 0;
constexpr std::uint8_t kFloat64 = 1;

void write_tokens(std::ostream& out, const Vocabulary& vocab) {
  io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(vocab.size()));
  for (const auto& t : vocab.tokens()) io::write_string(out, t);
}

Vocabulary read_tokens(std::istream& in) {
  const auto n = io::read_pod<std::uint32_t>(in, "vocabulary size");
  std::vector<std::string> tokens;
  tokens.reserve(std::min<std::uint32_t>(n, 1u << 20));
  for (std::uint32_t i = 0; i < n; ++i) tokens.push_back(io::read_string(in, "vocabulary entry"));
  try {
    return Vocabulary::from_tokens(std::move(tokens));
  } catch (const std::exception& e) {
    throw DataError(std::string("checkpoint vocabulary: ") + e.what());
  }
}

void write_values(std::ostream& out, const Tensor& t) {
  for (double v : t.data()) io::write_pod<double>(out, v);
}

Tensor read_values(std::istream& in, const Shape& shape, std::uint8_t dtype) {
  Tensor t(shape);
  for (auto& v : t.data()) {
    v = dtype == kFloat64 ? io::read_pod<double>(in, "parameter values")
                          : static_cast<double>(io::read_pod<float>(in, "parameter values"));
  }
  return t;
}

}  // namespace

ModelConfig Checkpoint::model_config() const {
  const std::size_t feature_dim = feature_stats ? feature_stats->mean.size() : 0;
  return config.model_config(source_vocab ? source_vocab->size() : 0, target_vocab.size(), feature_dim);
}

Checkpoint make_checkpoint(const RunConfig& config, std::optional<Vocabulary> source_vocab,
                           Vocabulary target_vocab, std::optional<audio::FeatureStats> stats) {
  Checkpoint c;
  c.config = config;
  c.source_vocab = std::move(source_vocab);
  c.target_vocab = std::move(target_vocab);
  c.feature_stats = std::move(stats);
  c.model = make_model(c.model_config(), config.seed);
  return c;
}

void write_checkpoint(std::ostream& out, const Checkpoint& c) {
  out.write(kMagic, sizeof(kMagic));
  io::write_pod<std::uint32_t>(out, kCheckpointVersion);
  io::write_string(out, c.config.to_text());
  io::write_pod<std::uint8_t>(out, c.source_vocab ? 1 : 0);
  if (c.source_vocab) write_tokens(out, *c.source_vocab);
  write_tokens(out, c.target_vocab);
  io::write_pod<std::uint8_t>(out, c.feature_stats ? 1 : 0);
  if (c.feature_stats) {
    io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(c.feature_stats->mean.size()));
    for (double v : c.feature_stats->mean) io::write_pod<double>(out, v);
    for (double v : c.feature_stats->stddev) io::write_pod<double>(out, v);
  }
  io::write_pod<std::uint64_t>(out, c.model.params.step());
  io::write_pod<double>(out, c.best_dev_bleu);
  const auto& entries = c.model.params.entries();
  io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, entry] : entries) {
    io::write_string(out, name);
    io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(entry.value.rank()));
    for (auto d : entry.value.shape()) io::write_pod<std::uint64_t>(out, d);
    io::write_pod<std::uint8_t>(out, kFloat64);
    write_values(out, entry.value);
    write_values(out, entry.first_moment);
    write_values(out, entry.second_moment);
  }
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError("not a checkpoint (bad magic)");
  }
  const auto version = io::read_pod<std::uint32_t>(in, "checkpoint version");
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  try {
    c.config = RunConfig::from_text(io::read_string(in, "config block"));
  } catch (const UsageError& e) {
    throw DataError(std::string("checkpoint config: ") + e.what());
  }
  if (io::read_pod<std::uint8_t>(in, "source vocabulary flag")) c.source_vocab = read_tokens(in);
  c.target_vocab = read_tokens(in);
  if (io::read_pod<std::uint8_t>(in, "feature stats flag")) {
    const auto dim = io::read_pod<std::uint32_t>(in, "feature dimension");
    audio::FeatureStats stats;
    stats.mean.resize(dim);
    stats.stddev.resize(dim);
    for (auto& v : stats.mean) v = io::read_pod<double>(in, "feature mean");
    for (auto& v : stats.stddev) v = io::read_pod<double>(in, "feature stddev");
    c.feature_stats = std::move(stats);
  }
  const auto step = io::read_pod<std::uint64_t>(in, "step counter");
  c.best_dev_bleu = io::read_pod<double>(in, "best dev BLEU");

  const auto count = io::read_pod<std::uint32_t>(in, "record count");
  ParameterStore store;
  for (std::uint32_t r = 0; r < count; ++r) {
    auto name = io::read_string(in, "parameter name");
    const auto rank = io::read_pod<std::uint32_t>(in, "parameter rank");
    if (rank > 8) throw DataError("parameter '" + name + "' has implausible rank " + std::to_string(rank));
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(io::read_pod<std::uint64_t>(in, "parameter shape"));
    const auto dtype = io::read_pod<std::uint8_t>(in, "parameter dtype");
    if (dtype != kFloat32 && dtype != kFloat64) {
      throw DataError("parameter '" + name + "' has unknown dtype " + std::to_string(dtype));
    }
    if (store.contains(name)) throw DataError("duplicate parameter '" + name + "'");
    ParameterEntry entry;
    entry.value = read_values(in, shape, dtype);
    entry.first_moment = read_values(in, shape, dtype);
    entry.second_moment = read_values(in, shape, dtype);
    store.restore(name, std::move(entry));
  }
  store.set_step(step);

  ModelConfig mc;
  try {
    c.config.validate();
    mc = c.model_config();
    mc.validate();
  } catch (const UsageError& e) {
    throw DataError(std::string("checkpoint config: ") + e.what());
  }
  if (mc.task == TaskKind::kText && !c.source_vocab) throw DataError("text checkpoint without source vocabulary");
  if (mc.task == TaskKind::kSpeech && !c.feature_stats) throw DataError("speech checkpoint without feature stats");
  check_parameters(mc, store);
  c.model = Seq2Seq{mc, std::move(store)};
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    write_checkpoint(out, checkpoint);
    out.flush();
    if (!out) throw DataError("failed writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  try {
    return read_checkpoint(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace s2t
