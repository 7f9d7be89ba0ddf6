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

#include "s2t/lm.hpp"
#include "s2t/model.hpp"

namespace s2t {

struct FusionWeights {
  std::vector<double> model_weights;  // empty: 1/numModels each
  double lm_weight = 0.2;
};

struct SearchOptions {
  std::size_t beam_size = 8;
  std::size_t max_length = 0;     // decoder steps including EOS; 0 selects the default
  bool length_normalize = false;  // rank completed hypotheses by score per token
  bool rescore_only = false;      // apply the LM to completed hypotheses only
};

struct Translation {
  TokenIds tokens;                             // without BOS and EOS
  double score = 0.0;                          // cumulative fused log probability
  bool finished = false;                       // ended with EOS
  std::vector<std::vector<double>> attention;  // one row of source weights per decoder step
};

/// 2 * source tokens + 10 for text, 2 * encoder output length + 10 for speech.
std::size_t default_max_length(const ModelConfig& config, const EncodedSource& encoded);

/// Argmax per step with ties to the lowest id, until EOS or max_length steps.
Translation greedy_decode(const Seq2Seq& model, const Source& source, std::size_t max_length = 0);

struct Hypothesis {
  TokenIds tokens;  // BOS first
  double score = 0.0;
  std::vector<DecoderState> states;  // one per model
  std::vector<std::vector<double>> attention;
  bool finished = false;
};

/// Beam search over the log-linear combination of `models` and an optional
/// trigram LM. Finished hypotheses leave the beam; hypotheses reaching
/// max_length are completed as they are.
Translation beam_search(std::span<const Seq2Seq* const> models, const Source& source,
                        const SearchOptions& options = {}, const TrigramModel* lm = nullptr,
                        const FusionWeights& weights = {});

/// Same, with the source prepared separately for each model (ensemble
/// members may use different source vocabularies or feature statistics).
Translation beam_search(std::span<const Seq2Seq* const> models, std::span<const Source> sources,
                        const SearchOptions& options = {}, const TrigramModel* lm = nullptr,
                        const FusionWeights& weights = {});

}  // namespace s2t
