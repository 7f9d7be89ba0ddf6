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

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "s2t/model.hpp"

namespace s2t {

/// Everything a training run needs. Serialized as flat `key=value` lines.
struct RunConfig {
  TaskKind task = TaskKind::kText;
  std::size_t units = 256;
  std::size_t embedding_size = 256;
  std::size_t prenet_size = 256;
  std::optional<AttentionKind> attention;  // unset: additive for text, convolutional for speech
  std::size_t filter_size = 25;
  std::size_t decoder_layers = 2;

  double learning_rate = 0.001;
  std::size_t batch_size = 64;
  double dropout = 0.5;
  std::size_t steps = 20000;
  std::size_t save_every = 1000;
  std::size_t log_every = 0;  // 0: same as save_every
  std::uint64_t seed = 1;
  std::size_t max_source_vocab = 0;  // 0: unlimited
  std::size_t max_target_vocab = 0;
  std::size_t dev_limit = 0;  // 0: whole dev set for validation BLEU

  std::string train_source;
  std::string train_target;
  std::string dev_source;
  std::string dev_target;
  std::string output_dir = "run";

  AttentionKind attention_kind() const;
  std::size_t effective_log_every() const { return log_every ? log_every : save_every; }

  /// Sets one field from text; throws UsageError on an unknown key or bad value.
  void set(const std::string& key, const std::string& value);
  /// Applies `key=value` lines; blank lines and `#` comments are skipped.
  void apply_text(std::string_view text);
  static RunConfig from_text(std::string_view text);
  static RunConfig load(const std::filesystem::path& path);
  std::string to_text() const;

  void validate() const;
  /// Model dimensions for the given vocabularies (text) or feature size (speech).
  ModelConfig model_config(std::size_t source_vocab, std::size_t target_vocab, std::size_t feature_dim) const;

  static const std::vector<std::string>& keys();
};

}  // namespace s2t
