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

#include "s2t/trainer.hpp"

#include <cstdio>

#include "s2t/errors.hpp"
#include "s2t/search.hpp"

namespace s2t {

namespace {

std::string format_value(const std::optional<double>& v, const char* fmt) {
  if (!v) return "-";
  char buf[40];
  std::snprintf(buf, sizeof(buf), fmt, *v);
  return buf;
}

double real_tokens(const Batch& batch) {
  double n = 0.0;
  for (const auto& row : batch.target_mask) {
    for (double m : row) n += m;
  }
  return n;
}

}  // namespace

std::string TrainLogRecord::to_line() const {
  return std::to_string(step) + "\t" + format_value(train_loss, "%.9g") + "\t" + format_value(dev_loss, "%.9g") +
         "\t" + format_value(dev_bleu, "%.2f");
}

std::vector<Batch> epoch_batches(const ParallelCorpus& corpus, std::size_t batch_size, std::uint64_t seed,
                                 std::uint64_t epoch) {
  return make_batches(corpus, batch_size, derive_seed(seed, epoch));
}

double corpus_loss(const Seq2Seq& model, const ParallelCorpus& corpus, std::size_t batch_size) {
  double total = 0.0;
  double tokens = 0.0;
  std::vector<std::size_t> indices;
  for (std::size_t start = 0; start < corpus.size(); start += batch_size) {
    indices.clear();
    for (std::size_t i = start; i < std::min(corpus.size(), start + batch_size); ++i) indices.push_back(i);
    const Batch batch = make_batch(corpus, indices);
    const double n = real_tokens(batch);
    total += batch_loss(model, batch) * n;
    tokens += n;
  }
  return tokens > 0.0 ? total / tokens : 0.0;
}

std::vector<TokenIds> greedy_translate_all(const Seq2Seq& model, const ParallelCorpus& corpus,
                                           std::size_t limit) {
  const std::size_t n = limit ? std::min(limit, corpus.size()) : corpus.size();
  std::vector<TokenIds> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(greedy_decode(model, corpus.examples[i].source).tokens);
  return out;
}

std::vector<TokenSequence> reference_set(const ParallelCorpus& corpus, const Vocabulary& target_vocab,
                                         std::size_t i) {
  if (!corpus.references.empty()) return corpus.references[i];
  return {target_vocab.decode(corpus.examples[i].target)};
}

BleuResult greedy_bleu(const Seq2Seq& model, const ParallelCorpus& corpus, const Vocabulary& target_vocab,
                       std::size_t limit) {
  const auto hyps = greedy_translate_all(model, corpus, limit);
  std::vector<TokenSequence> hyp_tokens;
  std::vector<std::vector<TokenSequence>> refs;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    hyp_tokens.push_back(target_vocab.decode(hyps[i]));
    refs.push_back(reference_set(corpus, target_vocab, i));
  }
  return bleu_multi_reference(hyp_tokens, refs);
}

TrainSummary train(Checkpoint& checkpoint, const ParallelCorpus& train_corpus, const ParallelCorpus* dev,
                   const TrainOptions& options) {
  if (train_corpus.size() == 0) throw DataError("empty training corpus");
  const RunConfig& config = checkpoint.config;
  Seq2Seq& model = checkpoint.model;
  const std::size_t per_epoch = (train_corpus.size() + config.batch_size - 1) / config.batch_size;
  const std::size_t log_every = config.effective_log_every();

  TrainSummary summary;
  std::optional<std::uint64_t> cached_epoch;
  std::vector<Batch> batches;
  while (model.params.step() < options.until_step) {
    const std::uint64_t step = model.params.step() + 1;
    const std::uint64_t epoch = (step - 1) / per_epoch;
    if (cached_epoch != epoch) {
      batches = epoch_batches(train_corpus, config.batch_size, config.seed, epoch);
      cached_epoch = epoch;
    }
    TrainSettings settings;
    settings.learning_rate = config.learning_rate;
    settings.dropout_seed = derive_seed(config.seed, step);
    const double loss = train_step(model, batches[(step - 1) % per_epoch], settings);
    summary.losses.push_back(loss);

    const bool save = step % config.save_every == 0 || step == options.until_step;
    if (!save && step % log_every != 0) continue;
    TrainLogRecord record{step, loss, std::nullopt, std::nullopt};
    if (save && dev && dev->size() > 0) {
      record.dev_loss = corpus_loss(model, *dev, config.batch_size);
      record.dev_bleu = greedy_bleu(model, *dev, checkpoint.target_vocab, config.dev_limit).score;
      summary.last_dev_bleu = record.dev_bleu;
    }
    if (save && options.output_dir) {
      const bool best = record.dev_bleu ? *record.dev_bleu > checkpoint.best_dev_bleu : true;
      if (best && record.dev_bleu) checkpoint.best_dev_bleu = *record.dev_bleu;
      std::filesystem::create_directories(*options.output_dir);
      save_checkpoint(*options.output_dir / ("checkpoint-" + std::to_string(step) + ".ckpt"), checkpoint);
      if (best) save_checkpoint(*options.output_dir / "best.ckpt", checkpoint);
    }
    if (options.sink) options.sink(record);
  }
  return summary;
}

}  // namespace s2t
