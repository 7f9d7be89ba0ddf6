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

#include <span>
#include <vector>

#include "s2t/corpus.hpp"

namespace s2t {

/// Sufficient statistics of corpus BLEU; they add across sentences.
struct BleuStats {
  std::vector<std::size_t> matches;  // clipped n-gram matches per order
  std::vector<std::size_t> totals;   // hypothesis n-grams per order
  std::size_t hypothesis_length = 0;
  std::size_t reference_length = 0;  // sum of closest reference lengths

  explicit BleuStats(std::size_t max_order = 4) : matches(max_order, 0), totals(max_order, 0) {}
  BleuStats& operator+=(const BleuStats& other);
};

struct BleuResult {
  double score = 0.0;  // 0..100
  std::vector<double> precisions;
  double brevity_penalty = 0.0;
  double length_ratio = 0.0;
  std::size_t hypothesis_length = 0;
  std::size_t reference_length = 0;
};

/// Statistics of one hypothesis against its reference set. Clipping uses the
/// maximum count over references; the reference length is the one closest
/// to the hypothesis length, ties going to the shorter.
BleuStats sentence_bleu_stats(const TokenSequence& hypothesis,
                              std::span<const TokenSequence> references, std::size_t max_order = 4);

BleuResult bleu_from_stats(const BleuStats& stats);

/// Corpus-level BLEU; zero when any order has no matches. Unsmoothed.
BleuResult bleu_multi_reference(std::span<const TokenSequence> hypotheses,
                                std::span<const std::vector<TokenSequence>> reference_sets,
                                std::size_t max_order = 4);

}  // namespace s2t
