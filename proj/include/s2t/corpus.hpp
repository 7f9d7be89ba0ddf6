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
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "s2t/audio.hpp"

namespace s2t {

using TokenSequence = std::vector<std::string>;
using TokenIds = std::vector<int>;

/// Lowercases, splits on whitespace and detaches . , ! ? ' " ; : ( )
TokenSequence tokenize(std::string_view line);
std::string join_tokens(const TokenSequence& tokens);

/// Reads one sentence per line; a missing file is a DataError.
std::vector<std::string> read_lines(const std::filesystem::path& path);
std::vector<TokenSequence> read_tokenized(const std::filesystem::path& path);

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kReserved = 4;

  /// Only the reserved entries.
  Vocabulary();

  /// Frequency ranked, ties broken lexicographically; `max_size` counts the
  /// reserved entries too.
  static Vocabulary build(std::span<const TokenSequence> corpus,
                          std::optional<std::size_t> max_size = std::nullopt);
  /// Rebuilds from an id-ordered token list that starts with the reserved entries.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  int id(const std::string& token) const;
  const std::string& token(int id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  TokenIds encode(const TokenSequence& tokens) const;
  /// Maps ids back to tokens, stopping at EOS and skipping PAD/BOS.
  TokenSequence decode(std::span<const int> ids) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

using Source = std::variant<TokenIds, audio::FeatureSequence>;

struct Example {
  Source source;
  TokenIds target;
};

struct ParallelCorpus {
  std::vector<Example> examples;
  /// Optional reference sets per example, for evaluation.
  std::vector<std::vector<TokenSequence>> references;

  std::size_t size() const { return examples.size(); }
  bool is_speech() const {
    return !examples.empty() && std::holds_alternative<audio::FeatureSequence>(examples[0].source);
  }
  /// Throws DataError on empty reference sets or count mismatches.
  void validate() const;
};

/// One padded mini-batch. Row b of every block belongs to corpus item indices[b].
struct Batch {
  std::vector<std::size_t> indices;
  std::size_t source_extent = 0;
  std::vector<std::size_t> source_lengths;
  std::vector<TokenIds> source_tokens;                 // text: B x A, PAD filled
  std::vector<audio::FeatureSequence> source_features;  // speech: B sequences of A frames, zero filled
  std::size_t target_extent = 0;
  std::vector<TokenIds> target_in;                 // BOS + target, PAD filled
  std::vector<TokenIds> target_out;                // target + EOS, PAD filled
  std::vector<std::vector<double>> target_mask;   // 1 on real output positions

  std::size_t size() const { return indices.size(); }
  bool is_speech() const { return !source_features.empty(); }
};

/// Builds a batch from the given corpus items, padding to the batch maxima.
Batch make_batch(const ParallelCorpus& corpus, std::span<const std::size_t> indices);

/// Deterministically shuffled batches; the last one may be short.
std::vector<Batch> make_batches(const ParallelCorpus& corpus, std::size_t batch_size,
                                std::uint64_t shuffle_seed);

/// Fisher-Yates permutation of 0..n-1 driven by mt19937_64(seed).
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed);

}  // namespace s2t
