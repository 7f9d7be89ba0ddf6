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

#include <filesystem>
#include <iosfwd>
#include <optional>

#include "s2t/audio.hpp"
#include "s2t/config.hpp"
#include "s2t/corpus.hpp"
#include "s2t/model.hpp"

namespace s2t {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Model plus everything needed to decode with it or resume training.
struct Checkpoint {
  RunConfig config;
  std::optional<Vocabulary> source_vocab;         // text task
  Vocabulary target_vocab;
  std::optional<audio::FeatureStats> feature_stats;  // speech task
  double best_dev_bleu = -1.0;                     // -1 before the first validation
  Seq2Seq model;                                   // step counter lives in model.params

  /// Architecture implied by the stored config, vocabularies and feature stats.
  ModelConfig model_config() const;
};

/// Fresh model for `config` with the given vocabularies.
Checkpoint make_checkpoint(const RunConfig& config, std::optional<Vocabulary> source_vocab,
                           Vocabulary target_vocab, std::optional<audio::FeatureStats> stats);

// Layout (little endian): "S2TCKPT1", u32 version, string config text,
// u8 has-source-vocab [u32 n, n strings], u32 n target tokens, n strings,
// u8 has-stats [u32 dim, dim f64 mean, dim f64 stddev], u64 step, f64 best dev
// BLEU, u32 record count, then per record: string name, u32 rank, rank u64
// dims, u8 dtype (0 f32, 1 f64), value, first moment, second moment.
// Strings are u32 length + bytes. Values are written as f64.
void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace s2t
