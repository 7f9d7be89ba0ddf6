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

#include "s2t/bleu.hpp"

#include <cmath>
#include <cstdlib>
#include <map>

#include "s2t/errors.hpp"

namespace s2t {

namespace {

using NgramCounts = std::map<std::span<const std::string>, std::size_t,
                             decltype([](std::span<const std::string> a, std::span<const std::string> b) {
                               return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
                             })>;

NgramCounts count_ngrams(const TokenSequence& tokens, std::size_t n) {
  NgramCounts counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[std::span<const std::string>(tokens).subspan(i, n)];
  }
  return counts;
}

}  // namespace

BleuStats& BleuStats::operator+=(const BleuStats& other) {
  for (std::size_t n = 0; n < matches.size(); ++n) {
    matches[n] += other.matches.at(n);
    totals[n] += other.totals.at(n);
  }
  hypothesis_length += other.hypothesis_length;
  reference_length += other.reference_length;
  return *this;
}

BleuStats sentence_bleu_stats(const TokenSequence& hypothesis,
                              std::span<const TokenSequence> references, std::size_t max_order) {
  if (references.empty()) throw DataError("BLEU: empty reference set");
  BleuStats stats(max_order);
  stats.hypothesis_length = hypothesis.size();

  std::size_t closest = references.front().size();
  for (const auto& ref : references) {
    const auto diff = [&](std::size_t len) {
      return len > hypothesis.size() ? len - hypothesis.size() : hypothesis.size() - len;
    };
    if (diff(ref.size()) < diff(closest) || (diff(ref.size()) == diff(closest) && ref.size() < closest)) {
      closest = ref.size();
    }
  }
  stats.reference_length = closest;

  for (std::size_t n = 1; n <= max_order; ++n) {
    const auto hyp_counts = count_ngrams(hypothesis, n);
    NgramCounts max_ref;
    for (const auto& ref : references) {
      for (const auto& [gram, c] : count_ngrams(ref, n)) {
        auto& slot = max_ref[gram];
        slot = std::max(slot, c);
      }
    }
    for (const auto& [gram, c] : hyp_counts) {
      stats.totals[n - 1] += c;
      auto it = max_ref.find(gram);
      if (it != max_ref.end()) stats.matches[n - 1] += std::min(c, it->second);
    }
  }
  return stats;
}

BleuResult bleu_from_stats(const BleuStats& stats) {
  BleuResult result;
  result.hypothesis_length = stats.hypothesis_length;
  result.reference_length = stats.reference_length;
  bool any_zero = false;
  double log_sum = 0.0;
  for (std::size_t n = 0; n < stats.matches.size(); ++n) {
    const double p = stats.totals[n] == 0
                         ? 0.0
                         : static_cast<double>(stats.matches[n]) / static_cast<double>(stats.totals[n]);
    result.precisions.push_back(p);
    if (stats.matches[n] == 0) {
      any_zero = true;
    } else {
      log_sum += std::log(p);
    }
  }
  const auto c = static_cast<double>(stats.hypothesis_length);
  const auto r = static_cast<double>(stats.reference_length);
  result.length_ratio = r > 0 ? c / r : 0.0;
  if (c == 0.0) {
    result.brevity_penalty = 0.0;
  } else {
    result.brevity_penalty = c < r ? std::exp(1.0 - r / c) : 1.0;
  }
  if (any_zero || c == 0.0) {
    result.score = 0.0;
  } else {
    result.score = 100.0 * result.brevity_penalty *
                   std::exp(log_sum / static_cast<double>(stats.matches.size()));
  }
  return result;
}

BleuResult bleu_multi_reference(std::span<const TokenSequence> hypotheses,
                                std::span<const std::vector<TokenSequence>> reference_sets,
                                std::size_t max_order) {
  if (hypotheses.size() != reference_sets.size()) {
    throw DataError("BLEU: " + std::to_string(hypotheses.size()) + " hypotheses but " +
                    std::to_string(reference_sets.size()) + " reference sets");
  }
  BleuStats total(max_order);
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    total += sentence_bleu_stats(hypotheses[i], reference_sets[i], max_order);
  }
  return bleu_from_stats(total);
}

}  // namespace s2t
