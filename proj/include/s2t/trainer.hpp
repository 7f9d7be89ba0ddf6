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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "s2t/bleu.hpp"
#include "s2t/checkpoint.hpp"
#include "s2t/corpus.hpp"

namespace s2t {

/// One `step<TAB>trainLoss<TAB>devLoss<TAB>devBLEU` line; "-" marks values not computed.
struct TrainLogRecord {
  std::uint64_t step = 0;
  double train_loss = 0.0;
  std::optional<double> dev_loss;
  std::optional<double> dev_bleu;

  std::string to_line() const;
};

inline constexpr const char* kTrainLogHeader = "step\ttrain_loss\tdev_loss\tdev_bleu";

using TrainLogSink = std::function<void(const TrainLogRecord&)>;

struct TrainOptions {
  std::uint64_t until_step = 0;                   // train until the step counter reaches this
  std::optional<std::filesystem::path> output_dir;  // checkpoints are written only when set
  TrainLogSink sink;
};

struct TrainSummary {
  std::vector<double> losses;  // one per step run
  std::optional<double> last_dev_bleu;
};

/// The batches of a given epoch. Batch order depends only on the seed and
/// the epoch, so a resumed run sees the same batches as an uninterrupted one.
std::vector<Batch> epoch_batches(const ParallelCorpus& corpus, std::size_t batch_size, std::uint64_t seed,
                                 std::uint64_t epoch);

/// Token-weighted loss over the corpus, dropout off.
double corpus_loss(const Seq2Seq& model, const ParallelCorpus& corpus, std::size_t batch_size);

/// Greedy decodes of the first `limit` items (all when 0).
std::vector<TokenIds> greedy_translate_all(const Seq2Seq& model, const ParallelCorpus& corpus,
                                           std::size_t limit = 0);

/// Reference sets of item i: corpus.references[i] when present, else the decoded target.
std::vector<TokenSequence> reference_set(const ParallelCorpus& corpus, const Vocabulary& target_vocab,
                                         std::size_t i);

/// Greedy BLEU of the first `limit` items against their reference sets.
BleuResult greedy_bleu(const Seq2Seq& model, const ParallelCorpus& corpus, const Vocabulary& target_vocab,
                       std::size_t limit = 0);

/// Runs train steps from the checkpoint's step counter up to `until_step`.
/// Step s uses dropout seed derive_seed(seed, s). Every save-every steps (and
/// at the last step) the dev set is scored, checkpoint-<step>.ckpt written and
/// best.ckpt replaced when dev BLEU improves. DivergenceError propagates
/// after leaving the last written checkpoint in place.
TrainSummary train(Checkpoint& checkpoint, const ParallelCorpus& train_corpus, const ParallelCorpus* dev,
                   const TrainOptions& options);

}  // namespace s2t
