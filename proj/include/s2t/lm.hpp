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

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "s2t/corpus.hpp"

namespace s2t {

/// Linearly interpolated trigram model over target ids. Each sentence is
/// counted as BOS BOS w1 .. wn EOS; BOS is context only, never predicted.
class TrigramModel {
 public:
  /// lambdas[k] weighs the order-(k+1) estimate.
  using Lambdas = std::array<double, 3>;
  static constexpr Lambdas kDefaultLambdas{0.1, 0.3, 0.6};

  TrigramModel() = default;

  static TrigramModel train(std::span<const TokenIds> corpus, std::size_t vocab_size,
                            const Lambdas& lambdas = kDefaultLambdas);

  /// p(w | u, v) = l3 p(w|u,v) + l2 p(w|v) + l1 p(w). Unseen contexts add 0;
  /// ids never counted get the unigram floor 1 / (V * total).
  double prob(int u, int v, int w) const;
  double logprob(int u, int v, int w) const;
  /// ln p of every id in the vocabulary after context (u, v).
  std::vector<double> next_logprobs(int u, int v) const;
  /// Sum of ln p over the sequence followed by EOS, starting from (BOS, BOS).
  double sequence_logprob(const TokenIds& tokens) const;

  /// Ids with a nonzero unigram count: the space over which prob() sums to 1.
  std::vector<int> observed_ids() const;
  bool observed_context(int u, int v) const;

  const Lambdas& lambdas() const { return lambdas_; }
  std::size_t vocab_size() const { return vocab_size_; }
  std::uint64_t total() const { return total_; }

  void write(std::ostream& out) const;
  static TrigramModel read(std::istream& in);
  void save(const std::string& path) const;
  static TrigramModel load(const std::string& path);

  friend bool operator==(const TrigramModel& a, const TrigramModel& b) {
    return a.lambdas_ == b.lambdas_ && a.vocab_size_ == b.vocab_size_ && a.unigrams_ == b.unigrams_ &&
           a.bigrams_ == b.bigrams_ && a.trigrams_ == b.trigrams_;
  }

 private:
  void index_contexts();

  Lambdas lambdas_ = kDefaultLambdas;
  std::size_t vocab_size_ = 0;
  std::map<int, std::uint64_t> unigrams_;
  std::map<std::array<int, 2>, std::uint64_t> bigrams_;
  std::map<std::array<int, 3>, std::uint64_t> trigrams_;
  std::uint64_t total_ = 0;
  std::map<int, std::uint64_t> bigram_contexts_;
  std::map<std::array<int, 2>, std::uint64_t> trigram_contexts_;
};

TrigramModel train_trigram(std::span<const TokenIds> corpus, std::size_t vocab_size);
double lm_logprob(const TrigramModel& model, const TokenIds& tokens);

}  // namespace s2t
