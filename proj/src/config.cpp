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

#include "s2t/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "s2t/errors.hpp"

namespace s2t {

namespace {

std::string canonical_key(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

std::string trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return std::string(s.substr(begin, end - begin + 1));
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || value.empty()) {
    throw UsageError("config key '" + key + "' expects a non-negative integer, got '" + value + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used == value.size()) return v;
  } catch (const std::exception&) {
  }
  throw UsageError("config key '" + key + "' expects a number, got '" + value + "'");
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k{
      "task",          "units",      "embedding-size", "prenet-size",      "attention",        "filter-size",
      "decoder-layers", "learning-rate", "batch-size",  "dropout",          "steps",            "save-every",
      "log-every",     "seed",       "max-source-vocab", "max-target-vocab", "dev-limit",        "train-source",
      "train-target",  "dev-source", "dev-target",     "output-dir"};
  return k;
}

AttentionKind RunConfig::attention_kind() const {
  if (attention) return *attention;
  return task == TaskKind::kText ? AttentionKind::kAdditive : AttentionKind::kConvolutional;
}

void RunConfig::set(const std::string& raw_key, const std::string& value) {
  const std::string key = canonical_key(raw_key);
  auto count = [&] { return static_cast<std::size_t>(parse_unsigned(key, value)); };
  if (key == "task") {
    if (value != "text" && value != "speech") throw UsageError("task must be 'text' or 'speech', got '" + value + "'");
    task = value == "text" ? TaskKind::kText : TaskKind::kSpeech;
  } else if (key == "units") {
    units = count();
  } else if (key == "embedding-size") {
    embedding_size = count();
  } else if (key == "prenet-size") {
    prenet_size = count();
  } else if (key == "attention") {
    if (value == "auto") {
      attention.reset();
    } else if (value == "additive" || value == "convolutional") {
      attention = value == "additive" ? AttentionKind::kAdditive : AttentionKind::kConvolutional;
    } else {
      throw UsageError("attention must be auto, additive or convolutional, got '" + value + "'");
    }
  } else if (key == "filter-size") {
    filter_size = count();
  } else if (key == "decoder-layers") {
    decoder_layers = count();
  } else if (key == "learning-rate") {
    learning_rate = parse_double(key, value);
  } else if (key == "batch-size") {
    batch_size = count();
  } else if (key == "dropout") {
    dropout = parse_double(key, value);
  } else if (key == "steps") {
    steps = count();
  } else if (key == "save-every") {
    save_every = count();
  } else if (key == "log-every") {
    log_every = count();
  } else if (key == "seed") {
    seed = parse_unsigned(key, value);
  } else if (key == "max-source-vocab") {
    max_source_vocab = count();
  } else if (key == "max-target-vocab") {
    max_target_vocab = count();
  } else if (key == "dev-limit") {
    dev_limit = count();
  } else if (key == "train-source") {
    train_source = value;
  } else if (key == "train-target") {
    train_target = value;
  } else if (key == "dev-source") {
    dev_source = value;
  } else if (key == "dev-target") {
    dev_target = value;
  } else if (key == "output-dir") {
    output_dir = value;
  } else {
    throw UsageError("unknown config key '" + raw_key + "'");
  }
}

void RunConfig::apply_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config line " + std::to_string(number) + ": expected key=value");
    }
    set(trim(std::string_view(body).substr(0, eq)), trim(std::string_view(body).substr(eq + 1)));
  }
}

RunConfig RunConfig::from_text(std::string_view text) {
  RunConfig c;
  c.apply_text(text);
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str());
}

std::string RunConfig::to_text() const {
  std::ostringstream out;
  out << "task=" << task_kind_name(task) << "\n";
  out << "units=" << units << "\n";
  out << "embedding-size=" << embedding_size << "\n";
  out << "prenet-size=" << prenet_size << "\n";
  out << "attention=" << (attention ? attention_kind_name(*attention) : "auto") << "\n";
  out << "filter-size=" << filter_size << "\n";
  out << "decoder-layers=" << decoder_layers << "\n";
  out << "learning-rate=" << format_double(learning_rate) << "\n";
  out << "batch-size=" << batch_size << "\n";
  out << "dropout=" << format_double(dropout) << "\n";
  out << "steps=" << steps << "\n";
  out << "save-every=" << save_every << "\n";
  out << "log-every=" << log_every << "\n";
  out << "seed=" << seed << "\n";
  out << "max-source-vocab=" << max_source_vocab << "\n";
  out << "max-target-vocab=" << max_target_vocab << "\n";
  out << "dev-limit=" << dev_limit << "\n";
  out << "train-source=" << train_source << "\n";
  out << "train-target=" << train_target << "\n";
  out << "dev-source=" << dev_source << "\n";
  out << "dev-target=" << dev_target << "\n";
  out << "output-dir=" << output_dir << "\n";
  return out.str();
}

void RunConfig::validate() const {
  if (units == 0 || embedding_size == 0 || prenet_size == 0) throw UsageError("model sizes must be positive");
  if (decoder_layers == 0) throw UsageError("decoder-layers must be positive");
  if (attention_kind() == AttentionKind::kConvolutional && filter_size % 2 == 0) {
    throw UsageError("filter-size must be odd");
  }
  if (!(learning_rate >= 0.0)) throw UsageError("learning-rate must be non-negative");
  if (batch_size == 0) throw UsageError("batch-size must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw UsageError("dropout must lie in [0, 1)");
  if (save_every == 0) throw UsageError("save-every must be positive");
}

ModelConfig RunConfig::model_config(std::size_t source_vocab, std::size_t target_vocab,
                                    std::size_t feature_dim) const {
  ModelConfig m;
  m.task = task;
  m.units = units;
  m.embedding_size = embedding_size;
  m.source_vocab = task == TaskKind::kText ? source_vocab : 0;
  m.target_vocab = target_vocab;
  m.feature_dim = feature_dim;
  m.prenet_size = prenet_size;
  m.decoder_layers = decoder_layers;
  m.attention = attention_kind();
  m.filter_size = filter_size;
  m.dropout = dropout;
  return m;
}

}  // namespace s2t
