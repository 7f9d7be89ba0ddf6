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

#include "s2t/search.hpp"

#include <algorithm>

#include "s2t/errors.hpp"

namespace s2t {

std::size_t default_max_length(const ModelConfig& config, const EncodedSource& encoded) {
  const std::size_t length = config.task == TaskKind::kText ? encoded.source_length : encoded.positions;
  return 2 * length + 10;
}

Translation greedy_decode(const Seq2Seq& model, const Source& source, std::size_t max_length) {
  const auto encoded = encode_source(model, source);
  if (max_length == 0) max_length = default_max_length(model.config, encoded);
  DecoderState state = initial_state(model, encoded);
  Translation out;
  int previous = Vocabulary::kBos;
  for (std::size_t t = 0; t < max_length; ++t) {
    auto step = decode_step(model, encoded, state, previous);
    // max_element returns the first maximum, i.e. the lowest id on ties.
    const auto best = std::max_element(step.log_probs.begin(), step.log_probs.end());
    previous = static_cast<int>(best - step.log_probs.begin());
    out.score += *best;
    out.attention.push_back(std::move(step.weights));
    state = std::move(step.state);
    if (previous == Vocabulary::kEos) {
      out.finished = true;
      break;
    }
    out.tokens.push_back(previous);
  }
  return out;
}

namespace {

struct Candidate {
  std::size_t parent;
  int token;
  double total;
  double local;
};

bool candidate_before(const Candidate& a, const Candidate& b) {
  if (a.total != b.total) return a.total > b.total;
  if (a.local != b.local) return a.local > b.local;
  if (a.token != b.token) return a.token < b.token;
  return a.parent < b.parent;
}

double ranking_score(const Hypothesis& h, bool normalize) {
  if (!normalize) return h.score;
  return h.score / static_cast<double>(h.tokens.size() - 1);
}

Translation to_translation(const Hypothesis& h) {
  Translation t;
  t.tokens.assign(h.tokens.begin() + 1, h.tokens.end() - (h.finished ? 1 : 0));
  t.score = h.score;
  t.finished = h.finished;
  t.attention = h.attention;
  return t;
}

}  // namespace

Translation beam_search(std::span<const Seq2Seq* const> models, const Source& source,
                        const SearchOptions& options, const TrigramModel* lm, const FusionWeights& fusion) {
  const std::vector<Source> sources(models.size(), source);
  return beam_search(models, sources, options, lm, fusion);
}

Translation beam_search(std::span<const Seq2Seq* const> models, std::span<const Source> sources,
                        const SearchOptions& options, const TrigramModel* lm, const FusionWeights& fusion) {
  if (models.empty()) throw DataError("beam search needs at least one model");
  if (sources.size() != models.size()) throw DataError("one source per model required");
  if (options.beam_size == 0) throw DataError("beam size must be positive");
  const std::size_t vocab = models[0]->config.target_vocab;
  for (const auto* m : models) {
    if (m->config.target_vocab != vocab) throw DataError("ensemble members disagree on the target vocabulary");
  }
  std::vector<double> weights = fusion.model_weights;
  if (weights.empty()) weights.assign(models.size(), 1.0 / static_cast<double>(models.size()));
  if (weights.size() != models.size()) throw DataError("one fusion weight per model required");
  for (double w : weights) {
    if (!(w > 0.0)) throw DataError("model fusion weights must be positive");
  }
  if (lm && fusion.lm_weight < 0.0) throw DataError("LM weight must be nonnegative");
  if (lm && lm->vocab_size() != vocab) throw DataError("LM vocabulary size does not match the model");
  const bool fuse_lm = lm != nullptr && fusion.lm_weight > 0.0;

  std::vector<EncodedSource> encoded;
  for (std::size_t j = 0; j < models.size(); ++j) encoded.push_back(encode_source(*models[j], sources[j]));
  const std::size_t max_length =
      options.max_length ? options.max_length : default_max_length(models[0]->config, encoded[0]);

  Hypothesis root;
  root.tokens = {Vocabulary::kBos};
  for (std::size_t j = 0; j < models.size(); ++j) root.states.push_back(initial_state(*models[j], encoded[j]));
  std::vector<Hypothesis> live{std::move(root)};
  std::vector<Hypothesis> completed;

  for (std::size_t t = 0; t < max_length && !live.empty(); ++t) {
    std::vector<Candidate> candidates;
    candidates.reserve(live.size() * vocab);
    std::vector<std::vector<StepResult>> steps(live.size());
    for (std::size_t i = 0; i < live.size(); ++i) {
      const auto& h = live[i];
      std::vector<double> fused(vocab, 0.0);
      for (std::size_t j = 0; j < models.size(); ++j) {
        steps[i].push_back(decode_step(*models[j], encoded[j], h.states[j], h.tokens.back()));
        const auto& lp = steps[i].back().log_probs;
        for (std::size_t w = 0; w < vocab; ++w) fused[w] += weights[j] * lp[w];
      }
      if (fuse_lm && !options.rescore_only) {
        const int v = h.tokens.back();
        const int u = h.tokens.size() >= 2 ? h.tokens[h.tokens.size() - 2] : Vocabulary::kBos;
        const auto lp = lm->next_logprobs(u, v);
        for (std::size_t w = 0; w < vocab; ++w) fused[w] += fusion.lm_weight * lp[w];
      }
      for (std::size_t w = 0; w < vocab; ++w) {
        candidates.push_back({i, static_cast<int>(w), h.score + fused[w], fused[w]});
      }
    }
    const std::size_t keep = std::min(options.beam_size, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(),
                      candidate_before);

    std::vector<Hypothesis> next;
    for (std::size_t k = 0; k < keep; ++k) {
      const auto& c = candidates[k];
      const auto& parent = live[c.parent];
      Hypothesis h;
      h.tokens = parent.tokens;
      h.tokens.push_back(c.token);
      h.score = c.total;
      h.attention = parent.attention;
      h.attention.push_back(steps[c.parent][0].weights);
      for (const auto& s : steps[c.parent]) h.states.push_back(s.state);
      h.finished = c.token == Vocabulary::kEos;
      if (h.finished || t + 1 == max_length) {
        h.states.clear();
        completed.push_back(std::move(h));
      } else {
        next.push_back(std::move(h));
      }
    }
    live = std::move(next);

    // Scores never increase with length, so a completed hypothesis at least as
    // good as every live one cannot be overtaken.
    if (!options.length_normalize && !options.rescore_only && !completed.empty() && !live.empty()) {
      double best_done = completed[0].score, best_live = live[0].score;
      for (const auto& h : completed) best_done = std::max(best_done, h.score);
      for (const auto& h : live) best_live = std::max(best_live, h.score);
      if (best_done >= best_live) break;
    }
  }

  if (fuse_lm && options.rescore_only) {
    for (auto& h : completed) {
      TokenIds body(h.tokens.begin() + 1, h.tokens.end() - (h.finished ? 1 : 0));
      double lp = lm->sequence_logprob(body);
      if (!h.finished) lp -= lm->logprob(body.size() >= 2 ? body[body.size() - 2] : Vocabulary::kBos,
                                         body.empty() ? Vocabulary::kBos : body.back(), Vocabulary::kEos);
      h.score += fusion.lm_weight * lp;
    }
  }

  // Completed in selection order; stable max keeps the earliest on ties.
  const Hypothesis* best = nullptr;
  for (const auto& h : completed) {
    if (!best || ranking_score(h, options.length_normalize) > ranking_score(*best, options.length_normalize)) {
      best = &h;
    }
  }
  return to_translation(*best);
}

}  // namespace s2t
