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

// Runs the acceptance criteria and prints one PASS/FAIL line per criterion.
// Usage: acceptance [criterion numbers...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bleu_oracle.hpp"
#include "s2t/audio.hpp"
#include "s2t/bleu.hpp"
#include "s2t/checkpoint.hpp"
#include "s2t/corpus.hpp"
#include "s2t/lm.hpp"
#include "s2t/search.hpp"
#include "s2t/trainer.hpp"

using namespace s2t;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), fmt, args...);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

void progress(const std::string& line) {
  std::fprintf(stderr, "  .. %s\n", line.c_str());
  std::fflush(stderr);
}

// ---- attention audit shared by criteria 2-4 and reported by criterion 5 ----

struct AttentionAudit {
  std::size_t rows = 0;
  double max_sum_error = 0.0;
  double max_masked_mass = 0.0;
  std::size_t masked_entries = 0;

  void row(std::span<const double> weights, std::size_t real_positions) {
    double sum = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (i < real_positions) {
        sum += weights[i];
      } else {
        max_masked_mass = std::max(max_masked_mass, std::abs(weights[i]));
        ++masked_entries;
      }
    }
    max_sum_error = std::max(max_sum_error, std::abs(sum - 1.0));
    ++rows;
  }
  void translation(const Translation& t) {
    for (const auto& r : t.attention) row(r, r.size());
  }
};

AttentionAudit g_audit;

// Teacher-forced batched decode; audits every attention row, padding included.
void audit_batch(const Seq2Seq& model, const Batch& batch) {
  ad::Graph g;
  auto bound = bind_model(g, model);
  auto encoded = encode_batch(bound, g, batch);
  auto state = init_state(bound, encoded.final_state);
  const std::size_t positions = encoded.memory.positions;
  for (std::size_t t = 0; t < batch.target_extent; ++t) {
    std::vector<int> prev(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) prev[b] = batch.target_in[b][t];
    auto step = decoder_step(bound, state, prev, encoded.memory);
    const Tensor weights = step.weights.value();
    for (std::size_t b = 0; b < batch.size(); ++b) {
      if (batch.target_mask[b][t] == 0.0) continue;
      g_audit.row(std::span<const double>(weights.data().data() + b * positions, positions), encoded.lengths[b]);
    }
    state = step.state;
  }
}

void audit_corpus(const Seq2Seq& model, const ParallelCorpus& corpus, std::size_t batch_size) {
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < corpus.size(); start += batch_size) {
    idx.clear();
    for (std::size_t i = start; i < std::min(corpus.size(), start + batch_size); ++i) idx.push_back(i);
    audit_batch(model, make_batch(corpus, idx));
  }
}

// ---- shared toy data ----

constexpr int kFirstSymbol = Vocabulary::kReserved + 1;

Vocabulary symbol_vocab(int symbols) {
  std::vector<std::string> tokens{"<pad>", "<s>", "</s>", "<unk>", "<reserved>"};
  for (int i = 0; i < symbols; ++i) tokens.push_back("s" + std::to_string(i));
  return Vocabulary::from_tokens(tokens);
}

TokenIds random_symbols(std::mt19937_64& rng, int symbols, int min_len, int max_len) {
  std::uniform_int_distribution<int> len(min_len, max_len);
  std::uniform_int_distribution<int> sym(0, symbols - 1);
  TokenIds out(static_cast<std::size_t>(len(rng)));
  for (auto& t : out) t = kFirstSymbol + sym(rng);
  return out;
}

enum class ToyTask { kReverse, kCopy };

ParallelCorpus symbol_corpus(ToyTask task, std::size_t n, int symbols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParallelCorpus corpus;
  for (std::size_t i = 0; i < n; ++i) {
    const TokenIds src = random_symbols(rng, symbols, 3, 8);
    TokenIds tgt = src;
    if (task == ToyTask::kReverse) std::reverse(tgt.begin(), tgt.end());
    corpus.examples.push_back({src, tgt});
  }
  return corpus;
}

struct ToyEval {
  double bleu = 0.0;
  double exact = 0.0;
  double token_accuracy = 0.0;
};

ToyEval evaluate_greedy(const Seq2Seq& model, const ParallelCorpus& corpus, const Vocabulary& vocab,
                        bool audit) {
  std::vector<TokenSequence> hyps;
  std::vector<std::vector<TokenSequence>> refs;
  std::size_t exact = 0, matches = 0, slots = 0;
  for (const auto& ex : corpus.examples) {
    const Translation t = greedy_decode(model, ex.source);
    if (audit) g_audit.translation(t);
    hyps.push_back(vocab.decode(t.tokens));
    refs.push_back({vocab.decode(ex.target)});
    if (t.tokens == ex.target) ++exact;
    for (std::size_t i = 0; i < std::min(t.tokens.size(), ex.target.size()); ++i) {
      matches += t.tokens[i] == ex.target[i];
    }
    slots += std::max(t.tokens.size(), ex.target.size());
  }
  ToyEval e;
  e.bleu = bleu_multi_reference(hyps, refs).score;
  e.exact = 100.0 * static_cast<double>(exact) / static_cast<double>(corpus.size());
  e.token_accuracy = 100.0 * static_cast<double>(matches) / static_cast<double>(slots);
  return e;
}

RunConfig toy_run_config(TaskKind task) {
  RunConfig c;
  c.task = task;
  c.units = 64;
  c.embedding_size = 64;
  c.prenet_size = 64;
  c.learning_rate = 0.001;
  c.batch_size = 64;
  c.dropout = 0.0;
  c.seed = 2026;
  c.save_every = 1000000;
  return c;
}

struct ToyModel {
  Checkpoint checkpoint;
  ToyEval eval;
  std::uint64_t steps = 0;
  double seconds = 0.0;
  bool trained = false;
};

// Trains in rounds of `every` steps until `done` holds or `max_steps` pass.
ToyModel train_toy(Checkpoint checkpoint, const ParallelCorpus& corpus, std::uint64_t max_steps,
                   std::uint64_t every, const std::function<bool(const ToyEval&)>& done, const char* label) {
  ToyModel out;
  const auto start = Clock::now();
  TrainOptions options;
  while (checkpoint.model.params.step() < max_steps) {
    options.until_step = std::min<std::uint64_t>(max_steps, checkpoint.model.params.step() + every);
    const auto summary = train(checkpoint, corpus, nullptr, options);
    out.eval = evaluate_greedy(checkpoint.model, corpus, checkpoint.target_vocab, false);
    progress(format("%s step %llu loss %.5f BLEU %.2f exact %.1f%% token acc %.1f%% (%.0f s)", label,
                    static_cast<unsigned long long>(checkpoint.model.params.step()), summary.losses.back(),
                    out.eval.bleu, out.eval.exact, out.eval.token_accuracy, seconds_since(start)));
    if (done(out.eval)) break;
  }
  out.steps = checkpoint.model.params.step();
  out.seconds = seconds_since(start);
  out.checkpoint = std::move(checkpoint);
  out.trained = true;
  return out;
}

ToyModel& reversal_model() {
  static ToyModel model = [] {
    const auto corpus = symbol_corpus(ToyTask::kReverse, 500, 15, 101);
    const auto config = toy_run_config(TaskKind::kText);
    Checkpoint c = make_checkpoint(config, symbol_vocab(15), symbol_vocab(15), std::nullopt);
    return train_toy(std::move(c), corpus, 5000, 250,
                     [](const ToyEval& e) { return e.bleu >= 95.0 && e.exact >= 90.0; }, "reversal");
  }();
  return model;
}

ToyModel& copy_model() {
  static ToyModel model = [] {
    const auto corpus = symbol_corpus(ToyTask::kCopy, 500, 15, 202);
    auto config = toy_run_config(TaskKind::kText);
    config.seed = 7;
    Checkpoint c = make_checkpoint(config, symbol_vocab(15), symbol_vocab(15), std::nullopt);
    return train_toy(std::move(c), corpus, 5000, 250,
                     [](const ToyEval& e) { return e.bleu >= 99.0 && e.exact >= 98.0; }, "copy");
  }();
  return model;
}

// ---- criteria ----

Outcome criterion_gradients() {
  const auto start = Clock::now();
  std::mt19937_64 rng(41);
  double worst = 0.0;
  std::string per_kind;
  for (auto kind : {AttentionKind::kAdditive, AttentionKind::kConvolutional}) {
    ModelConfig config;
    config.task = TaskKind::kText;
    config.units = 8;
    config.embedding_size = 8;
    config.source_vocab = 20;
    config.target_vocab = 20;
    config.attention = kind;
    config.filter_size = 3;
    config.dropout = 0.0;
    Seq2Seq model = make_model(config, 43);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (const auto& name : model.params.names()) {
      for (auto& v : model.params.mutable_value(name).data()) v = dist(rng);
    }
    ParallelCorpus corpus;
    for (std::size_t len : {5, 9, 7}) {
      TokenIds src(len), tgt(2 + len % 3);
      for (auto& t : src) t = kFirstSymbol + static_cast<int>(rng() % 15);
      for (auto& t : tgt) t = kFirstSymbol + static_cast<int>(rng() % 15);
      corpus.examples.push_back({src, tgt});
    }
    const std::vector<std::size_t> idx{0, 1, 2};
    const Batch batch = make_batch(corpus, idx);
    std::map<std::string, Tensor> point;
    for (const auto& [name, e] : model.params.entries()) point[name] = e.value;
    ScalarFunction f = [&](ad::Graph& g, const std::map<std::string, ad::Var>& v) {
      auto bound = bind_model(config, [&](const std::string& n) { return v.at(n); });
      return sequence_nll(bound, g, batch);
    };
    const double err = gradient_check(f, point, 1e-5);
    worst = std::max(worst, err);
    per_kind += format("%s %.2e ", attention_kind_name(kind), err);
  }
  const double secs = seconds_since(start);
  return {worst < 1e-3 && secs < 60.0,
          format("max relative error %s(limit 1e-3), %zu tensors per model, %.1f s", per_kind.c_str(),
                 parameter_specs([] {
                   ModelConfig c;
                   c.units = 8;
                   c.embedding_size = 8;
                   c.source_vocab = 20;
                   c.target_vocab = 20;
                   return c;
                 }()).size(),
                 secs)};
}

Outcome criterion_text_toy() {
  ToyModel& m = reversal_model();
  const auto corpus = symbol_corpus(ToyTask::kReverse, 500, 15, 101);
  const ToyEval e = evaluate_greedy(m.checkpoint.model, corpus, m.checkpoint.target_vocab, true);
  audit_corpus(m.checkpoint.model, corpus, 64);
  const bool pass = e.bleu >= 95.0 && e.exact >= 90.0 && m.steps <= 5000 && m.seconds < 900.0;
  return {pass, format("reversal, 500 pairs, V=20, m=64: greedy BLEU %.2f, exact %.1f%% after %llu steps, %.0f s",
                       e.bleu, e.exact, static_cast<unsigned long long>(m.steps), m.seconds)};
}

struct SpeechToy {
  ParallelCorpus corpus;
  Vocabulary vocab = symbol_vocab(10);
  audio::FeatureStats stats;
};

SpeechToy speech_toy() {
  constexpr int kSymbols = 10;
  std::mt19937_64 rng(303);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.05);
  std::vector<std::vector<double>> patterns(kSymbols, std::vector<double>(audio::kFeatureDim));
  for (auto& p : patterns)
    for (auto& v : p) v = unit(rng);
  std::uniform_int_distribution<int> repeat(4, 8);
  SpeechToy toy;
  std::vector<audio::FeatureSequence> sources;
  std::vector<TokenIds> targets;
  for (int i = 0; i < 200; ++i) {
    TokenIds symbols = random_symbols(rng, kSymbols, 3, 6);
    audio::FeatureSequence seq;
    for (int s : symbols) {
      const int frames = repeat(rng);
      for (int f = 0; f < frames; ++f) {
        for (double v : patterns[static_cast<std::size_t>(s - kFirstSymbol)]) seq.values.push_back(v + noise(rng));
        ++seq.frames;
      }
    }
    sources.push_back(std::move(seq));
    targets.push_back(std::move(symbols));
  }
  toy.stats = audio::compute_feature_stats(sources);
  for (std::size_t i = 0; i < sources.size(); ++i) {
    toy.corpus.examples.push_back({audio::normalize_features(sources[i], toy.stats), targets[i]});
  }
  return toy;
}

Outcome criterion_speech_toy() {
  const SpeechToy toy = speech_toy();
  auto config = toy_run_config(TaskKind::kSpeech);
  config.batch_size = 32;
  config.seed = 9;
  Checkpoint c = make_checkpoint(config, std::nullopt, toy.vocab, toy.stats);
  ToyModel m = train_toy(std::move(c), toy.corpus, 10000, 250,
                         [](const ToyEval& e) { return e.token_accuracy >= 90.0; }, "speech");
  const ToyEval e = evaluate_greedy(m.checkpoint.model, toy.corpus, toy.vocab, true);
  audit_corpus(m.checkpoint.model, toy.corpus, 32);
  const bool pass = e.token_accuracy >= 90.0 && m.steps <= 10000 && m.seconds < 2700.0;
  return {pass, format("pyramidal encoder + convolutional attention, 200 pairs: token accuracy %.1f%% "
                       "(exact %.1f%%) after %llu steps, %.0f s",
                       e.token_accuracy, e.exact, static_cast<unsigned long long>(m.steps), m.seconds)};
}

Seq2Seq random_small_model(std::size_t vocab, std::uint64_t seed, double scale) {
  ModelConfig c;
  c.units = 6;
  c.embedding_size = 5;
  c.source_vocab = vocab;
  c.target_vocab = vocab;
  c.attention = seed % 2 ? AttentionKind::kAdditive : AttentionKind::kConvolutional;
  c.filter_size = 3;
  c.dropout = 0.0;
  Seq2Seq model = make_model(c, seed);
  std::mt19937_64 rng(seed * 31 + 5);
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (const auto& name : model.params.names())
    for (auto& v : model.params.mutable_value(name).data()) v = dist(rng);
  return model;
}

TokenIds random_source(std::mt19937_64& rng, std::size_t vocab, std::size_t len) {
  TokenIds ids(len);
  for (auto& t : ids) t = kFirstSymbol + static_cast<int>(rng() % (vocab - kFirstSymbol));
  return ids;
}

struct Best {
  double score = -INFINITY;
  TokenIds tokens;
};

// Every output of at most max_len decoder steps: EOS-terminated or max_len tokens.
void enumerate(const Seq2Seq& model, const EncodedSource& enc, const DecoderState& state, int prev, TokenIds& prefix,
               double score, std::size_t max_len, Best& best) {
  const StepResult step = decode_step(model, enc, state, prev);
  for (std::size_t w = 0; w < step.log_probs.size(); ++w) {
    const double s = score + step.log_probs[w];
    const int id = static_cast<int>(w);
    if (id == Vocabulary::kEos || prefix.size() + 1 == max_len) {
      TokenIds out = prefix;
      if (id != Vocabulary::kEos) out.push_back(id);
      if (s > best.score) best = {s, out};
      continue;
    }
    prefix.push_back(id);
    enumerate(model, enc, step.state, id, prefix, s, max_len, best);
    prefix.pop_back();
  }
}

Translation run_beam(std::span<const Seq2Seq* const> models, const TokenIds& src, std::size_t beam,
                     std::size_t max_len = 0, const TrigramModel* lm = nullptr, double lm_weight = 0.2) {
  SearchOptions o;
  o.beam_size = beam;
  o.max_length = max_len;
  return beam_search(models, Source(src), o, lm, FusionWeights{{}, lm_weight});
}

Outcome criterion_ladder() {
  constexpr int kInstances = 100;
  constexpr std::size_t kVocab = 9;
  std::mt19937_64 rng(404);
  int greedy_ok = 0, lm_ok = 0, ensemble_ok = 0, exhaustive_ok = 0;

  std::vector<TokenIds> lm_corpus;
  for (int i = 0; i < 60; ++i) lm_corpus.push_back(random_source(rng, kVocab, 1 + rng() % 7));
  const TrigramModel lm = train_trigram(lm_corpus, kVocab);

  for (int i = 0; i < kInstances; ++i) {
    const Seq2Seq model = random_small_model(kVocab, 1000 + static_cast<std::uint64_t>(i), 1.5);
    const TokenIds src = random_source(rng, kVocab, 2 + static_cast<std::size_t>(i % 7));
    const Seq2Seq* single[] = {&model};

    const Translation greedy = greedy_decode(model, Source(src));
    const Translation beam1 = run_beam(single, src, 1);
    g_audit.translation(greedy);
    g_audit.translation(beam1);
    greedy_ok += greedy.tokens == beam1.tokens && greedy.score == beam1.score;

    const std::size_t beam = 2 + static_cast<std::size_t>(i % 5);
    const Translation plain = run_beam(single, src, beam);
    const Translation zero_lm = run_beam(single, src, beam, 0, &lm, 0.0);
    g_audit.translation(plain);
    lm_ok += plain.tokens == zero_lm.tokens && plain.score == zero_lm.score;

    const std::size_t copies = 2 + static_cast<std::size_t>(i % 4);
    std::vector<const Seq2Seq*> ensemble(copies, &model);
    const Translation joint = run_beam(ensemble, src, beam);
    g_audit.translation(joint);
    ensemble_ok += joint.tokens == plain.tokens && std::abs(joint.score - plain.score) <= 1e-12 * std::abs(plain.score);

    constexpr std::size_t kMaxLen = 3;
    const Seq2Seq toy = random_small_model(6, 5000 + static_cast<std::uint64_t>(i), 2.0);
    const TokenIds toy_src = random_source(rng, 6, 2 + static_cast<std::size_t>(i % 3));
    const Seq2Seq* toy_models[] = {&toy};
    const EncodedSource enc = encode_source(toy, Source(toy_src));
    Best best;
    TokenIds prefix;
    enumerate(toy, enc, initial_state(toy, enc), Vocabulary::kBos, prefix, 0.0, kMaxLen, best);
    const Translation wide = run_beam(toy_models, toy_src, 6 * 6 * 6, kMaxLen);
    g_audit.translation(wide);
    exhaustive_ok += wide.tokens == best.tokens && std::abs(wide.score - best.score) <= 1e-12;
  }
  const bool pass = greedy_ok == kInstances && lm_ok == kInstances && ensemble_ok == kInstances &&
                    exhaustive_ok == kInstances;
  return {pass, format("beam-1=greedy %d/%d, lambda0=noLM %d/%d, identical ensemble=single %d/%d, "
                       "beam 216=exhaustive (V=6, maxLen 3) %d/%d",
                       greedy_ok, kInstances, lm_ok, kInstances, ensemble_ok, kInstances, exhaustive_ok, kInstances)};
}

Outcome criterion_attention_sums() {
  const bool pass = g_audit.rows > 0 && g_audit.max_sum_error <= 1e-9 && g_audit.max_masked_mass == 0.0;
  return {pass, format("%zu attention rows from criteria 2-4 decodes: max |sum-1| %.2e, masked entries %zu "
                       "with max mass %.1e",
                       g_audit.rows, g_audit.max_sum_error, g_audit.masked_entries, g_audit.max_masked_mass)};
}

Outcome criterion_length_law() {
  ModelConfig c;
  c.task = TaskKind::kSpeech;
  c.units = 2;
  c.embedding_size = 2;
  c.prenet_size = 2;
  c.target_vocab = 6;
  c.attention = AttentionKind::kConvolutional;
  c.filter_size = 3;
  c.dropout = 0.0;
  const Seq2Seq model = make_model(c, 5);
  std::mt19937_64 rng(606);
  std::normal_distribution<double> dist(0.0, 1.0);
  int failures = 0, checked = 0;
  for (std::size_t a = 4; a <= 200; ++a) {
    const std::size_t want = ((a + 1) / 2 + 1) / 2;
    audio::FeatureSequence seq;
    seq.frames = a;
    for (std::size_t i = 0; i < a * seq.dim; ++i) seq.values.push_back(dist(rng));
    const EncodedSource enc = encode_source(model, Source(seq));
    failures += encoder_output_length(c.encoder(), a) != want || enc.positions != want;
    ++checked;
  }
  int quarter = 0;
  for (std::size_t a = 4; a <= 200; a += 4) quarter += encoder_output_length(c.encoder(), a) == a / 4;
  return {failures == 0 && quarter == 50,
          format("outputLength(A) = ceil(ceil(A/2)/2) for A in [4,200]: %d/%d (encoder run on each); A/4 on "
                 "multiples of 4: %d/50",
                 checked - failures, checked, quarter)};
}

Outcome criterion_frame_count() {
  const std::size_t samples = 16000 * 28 / 10;
  audio::AudioBuffer buffer;
  buffer.sample_rate = 16000;
  buffer.samples.resize(samples);
  for (std::size_t i = 0; i < samples; ++i) buffer.samples[i] = 0.3 * std::sin(0.07 * static_cast<double>(i));
  const auto features = audio::extract_features(buffer);
  const std::size_t counted = audio::frame_count(samples, audio::ms_to_samples(40.0, 16000),
                                                 audio::ms_to_samples(10.0, 16000));
  const double deviation = std::abs(static_cast<double>(features.frames) - 281.0) / 281.0;
  return {features.frames == 277 && counted == 277 && deviation < 0.02,
          format("2.8 s at 16 kHz: %zu frames (frame_count %zu), %.2f%% from 281", features.frames, counted,
                 100.0 * deviation)};
}

Outcome criterion_lm_normalization() {
  std::mt19937_64 rng(808);
  TokenSequence words;
  for (int i = 0; i < 25; ++i) words.push_back("w" + std::to_string(i));
  std::vector<TokenSequence> sentences;
  for (int i = 0; i < 50; ++i) {
    TokenSequence s;
    const int len = 1 + static_cast<int>(rng() % 12);
    for (int k = 0; k < len; ++k) s.push_back(words[rng() % words.size()]);
    sentences.push_back(std::move(s));
  }
  const Vocabulary vocab = Vocabulary::build(sentences);
  std::vector<TokenIds> corpus;
  for (const auto& s : sentences) corpus.push_back(vocab.encode(s));
  const TrigramModel lm = train_trigram(corpus, vocab.size());
  const auto events = lm.observed_ids();
  const int v = static_cast<int>(vocab.size());
  int contexts = 0;
  double worst = 0.0;
  for (int a = 0; a < v; ++a) {
    for (int b = 0; b < v; ++b) {
      if (!lm.observed_context(a, b)) continue;
      ++contexts;
      double total = 0.0;
      for (int w : events) total += lm.prob(a, b, w);
      worst = std::max(worst, std::abs(total - 1.0));
    }
  }
  return {contexts > 0 && worst <= 1e-9,
          format("%d observed contexts over a 50-sentence corpus, %zu predictable ids: max |sum-1| %.2e", contexts,
                 events.size(), worst)};
}

TokenSequence words(const std::string& s) { return tokenize(s); }

Outcome criterion_bleu() {
  const std::vector<TokenSequence> identity{words("the cat sat on the mat today"),
                                            words("a quick brown fox jumps over the dog")};
  std::vector<std::vector<TokenSequence>> identity_refs;
  for (const auto& s : identity) identity_refs.push_back({s});
  const double id_score = bleu_multi_reference(identity, identity_refs).score;

  struct Case {
    std::vector<std::string> hyps;
    std::vector<std::vector<std::string>> refs;
  };
  const std::vector<Case> cases{
      {{"the cat is on the mat now"}, {{"the cat is on the mat", "there is a cat on the mat now"}}},
      {{"the the the the the the the"}, {{"the cat is on the mat", "the the cat"}}},
      {{"it is a guide to action which ensures that the military always obeys the commands of the party"},
       {{"it is a guide to action that ensures that the military will forever heed party commands",
         "it is the guiding principle which guarantees the military forces always being under the command of the "
         "party",
         "it is the practical guide for the army always to heed the directions of the party"}}},
      {{"he read the book because he was interested in world history"},
       {{"he was interested in world history because he read the book"}}},
      {{"a b c d e", "a b c d e f g"}, {{"a b c d e f"}, {"a b c d x f g", "a b c d e f g h"}}},
      {{"one two three four five six"}, {{"one two three four", "one two three four five six seven eight nine"}}},
      {{"x y z w v u t s"}, {{"x y z w", "x y z w v u", "x y z w v u t s r q"}}},
      {{"we saw the red house by the lake", "the lake was cold"},
       {{"we saw a red house near the lake", "we saw the red house by a lake"},
        {"the lake was very cold", "the water was cold"}}},
      {{"time flies like an arrow fruit flies like a banana"},
       {{"time flies like an arrow and fruit flies like a banana", "time flies like an arrow",
         "fruit flies like a banana time flies like an arrow"}}},
      {{"to be or not to be that is the question"},
       {{"to be or not to be is the question", "whether to be or not to be that is the question"}}},
  };
  int agree = 0, nonzero = 0;
  double worst = 0.0;
  for (const auto& c : cases) {
    std::vector<TokenSequence> hyps;
    std::vector<std::vector<TokenSequence>> refs;
    for (std::size_t i = 0; i < c.hyps.size(); ++i) {
      hyps.push_back(words(c.hyps[i]));
      std::vector<TokenSequence> set;
      for (const auto& r : c.refs[i]) set.push_back(words(r));
      refs.push_back(std::move(set));
    }
    const double got = bleu_multi_reference(hyps, refs).score;
    const double want = testing::oracle_bleu(hyps, refs);
    worst = std::max(worst, std::abs(got - want));
    agree += std::abs(got - want) <= 0.01;
    nonzero += got > 0.0;
  }
  return {std::abs(id_score - 100.0) < 1e-9 && agree == 10,
          format("identity %.2f; %d/10 multi-reference cases within 0.01 of the oracle (max diff %.1e, %d with "
                 "nonzero BLEU)",
                 id_score, agree, worst, nonzero)};
}

std::string file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome criterion_checkpoint() {
  const fs::path dir = fs::temp_directory_path() / "s2t_acceptance_ckpt";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto corpus = symbol_corpus(ToyTask::kReverse, 40, 8, 1010);
  RunConfig config = toy_run_config(TaskKind::kText);
  config.units = 16;
  config.embedding_size = 12;
  config.batch_size = 8;
  config.dropout = 0.3;
  config.learning_rate = 0.005;
  const Vocabulary vocab = symbol_vocab(8);

  Checkpoint full = make_checkpoint(config, vocab, vocab, std::nullopt);
  TrainOptions options;
  options.until_step = 200;
  const auto reference = train(full, corpus, nullptr, options).losses;

  Checkpoint part = make_checkpoint(config, vocab, vocab, std::nullopt);
  options.until_step = 100;
  train(part, corpus, nullptr, options);
  save_checkpoint(dir / "a.ckpt", part);
  Checkpoint resumed = load_checkpoint(dir / "a.ckpt");
  save_checkpoint(dir / "b.ckpt", resumed);
  const bool identical = file_bytes(dir / "a.ckpt") == file_bytes(dir / "b.ckpt");
  options.until_step = 200;
  const auto rest = train(resumed, corpus, nullptr, options).losses;

  int equal = 0;
  for (std::size_t i = 0; i < rest.size(); ++i) equal += rest[i] == reference[100 + i];
  save_checkpoint(dir / "full.ckpt", full);
  save_checkpoint(dir / "resumed.ckpt", resumed);
  const bool same_final = file_bytes(dir / "full.ckpt") == file_bytes(dir / "resumed.ckpt");
  return {identical && equal == 100 && rest.size() == 100 && same_final,
          format("save-load-save byte identical: %s; resumed losses bit-equal for %d/100 steps (dropout 0.3); "
                 "final checkpoints identical: %s",
                 identical ? "yes" : "no", equal, same_final ? "yes" : "no")};
}

bool non_decreasing_argmax(const std::vector<std::vector<double>>& rows, std::size_t count) {
  std::size_t prev = 0;
  for (std::size_t r = 0; r < count; ++r) {
    const auto& row = rows[r];
    const auto arg = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    if (r > 0 && arg < prev) return false;
    prev = arg;
  }
  return true;
}

Outcome criterion_alignment() {
  ToyModel& m = copy_model();
  const auto test = symbol_corpus(ToyTask::kCopy, 200, 15, 909);
  int monotone = 0, monotone_with_eos = 0;
  for (const auto& ex : test.examples) {
    const auto rows = teacher_forced_attention(m.checkpoint.model, ex.source, ex.target);
    monotone += non_decreasing_argmax(rows, ex.target.size());
    monotone_with_eos += non_decreasing_argmax(rows, rows.size());
  }
  const double share = 100.0 * monotone / static_cast<double>(test.size());
  return {share >= 95.0,
          format("copy model (%llu steps, train exact %.1f%%), 200 held-out sentences, teacher forced: argmax "
                 "non-decreasing over output-token rows %.1f%%, including the EOS row %.1f%%",
                 static_cast<unsigned long long>(m.steps), m.eval.exact, share,
                 100.0 * monotone_with_eos / static_cast<double>(test.size()))};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    Outcome (*run)();
  };
  const std::vector<Criterion> criteria{
      {1, "gradient integrity", criterion_gradients},
      {2, "text toy task", criterion_text_toy},
      {3, "speech-like toy task", criterion_speech_toy},
      {4, "decoding-ladder laws", criterion_ladder},
      {5, "attention normalization", criterion_attention_sums},
      {6, "pyramidal length law", criterion_length_law},
      {7, "frame-count consistency", criterion_frame_count},
      {8, "trigram LM normalization", criterion_lm_normalization},
      {9, "BLEU correctness", criterion_bleu},
      {10, "checkpoint round trip and resume", criterion_checkpoint},
      {11, "alignment monotonicity", criterion_alignment},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("[%s] %2d %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
