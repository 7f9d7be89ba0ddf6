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

#include "s2t/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <random>

#include "s2t/errors.hpp"

namespace s2t {

namespace {

bool is_split_punct(char c) {
  switch (c) {
    case '.':
    case ',':
    case '!':
    case '?':
    case '\'':
    case '"':
    case ';':
    case ':':
    case '(':
    case ')':
      return true;
    default:
      return false;
  }
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

const char* const kReservedTokens[] = {"<pad>", "<s>", "</s>", "<unk>"};

}  // namespace

TokenSequence tokenize(std::string_view line) {
  TokenSequence out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  for (char c : line) {
    if (is_space(c)) {
      flush();
    } else if (is_split_punct(c)) {
      flush();
      out.emplace_back(1, c);
    } else {
      current.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c);
    }
  }
  flush();
  return out;
}

std::string join_tokens(const TokenSequence& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::vector<TokenSequence> read_tokenized(const std::filesystem::path& path) {
  std::vector<TokenSequence> out;
  for (const auto& line : read_lines(path)) out.push_back(tokenize(line));
  return out;
}

Vocabulary::Vocabulary() {
  for (const char* t : kReservedTokens) {
    index_.emplace(t, static_cast<int>(tokens_.size()));
    tokens_.emplace_back(t);
  }
}

Vocabulary Vocabulary::build(std::span<const TokenSequence> corpus, std::optional<std::size_t> max_size) {
  std::map<std::string, std::size_t> counts;
  for (const auto& sentence : corpus) {
    for (const auto& tok : sentence) ++counts[tok];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocabulary vocab;
  for (const auto& [tok, _] : ranked) {
    if (max_size && vocab.size() >= *max_size) break;
    if (vocab.index_.count(tok)) continue;
    vocab.index_.emplace(tok, static_cast<int>(vocab.tokens_.size()));
    vocab.tokens_.push_back(tok);
  }
  return vocab;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < kReserved) throw DataError("vocabulary lacks reserved entries");
  for (int i = 0; i < kReserved; ++i) {
    if (tokens[static_cast<std::size_t>(i)] != kReservedTokens[i]) {
      throw DataError("vocabulary reserved entry " + std::to_string(i) + " is '" +
                      tokens[static_cast<std::size_t>(i)] + "'");
    }
  }
  Vocabulary vocab;
  for (std::size_t i = kReserved; i < tokens.size(); ++i) {
    if (!vocab.index_.emplace(tokens[i], static_cast<int>(i)).second) {
      throw DataError("duplicate vocabulary entry '" + tokens[i] + "'");
    }
    vocab.tokens_.push_back(std::move(tokens[i]));
  }
  return vocab;
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw DataError("token id " + std::to_string(id) + " outside vocabulary of size " +
                    std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

TokenIds Vocabulary::encode(const TokenSequence& tokens) const {
  TokenIds ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

TokenSequence Vocabulary::decode(std::span<const int> ids) const {
  TokenSequence out;
  for (int id : ids) {
    if (id == kEos) break;
    if (id == kPad || id == kBos) continue;
    out.push_back(token(id));
  }
  return out;
}

void ParallelCorpus::validate() const {
  if (!references.empty()) {
    if (references.size() != examples.size()) {
      throw DataError("reference sets (" + std::to_string(references.size()) +
                      ") do not match corpus size (" + std::to_string(examples.size()) + ")");
    }
    for (std::size_t i = 0; i < references.size(); ++i) {
      if (references[i].empty()) throw DataError("empty reference set for item " + std::to_string(i));
    }
  }
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

Batch make_batch(const ParallelCorpus& corpus, std::span<const std::size_t> indices) {
  if (indices.empty()) throw DataError("make_batch: no items");
  Batch batch;
  batch.indices.assign(indices.begin(), indices.end());
  const bool speech = corpus.is_speech();

  for (std::size_t idx : indices) {
    const Example& ex = corpus.examples.at(idx);
    const std::size_t len = speech ? std::get<audio::FeatureSequence>(ex.source).frames
                                   : std::get<TokenIds>(ex.source).size();
    batch.source_lengths.push_back(len);
    batch.source_extent = std::max(batch.source_extent, len);
    batch.target_extent = std::max(batch.target_extent, ex.target.size() + 1);
  }

  for (std::size_t b = 0; b < indices.size(); ++b) {
    const Example& ex = corpus.examples[indices[b]];
    if (speech) {
      const auto& src = std::get<audio::FeatureSequence>(ex.source);
      audio::FeatureSequence padded;
      padded.dim = src.dim;
      padded.frames = batch.source_extent;
      padded.values.assign(padded.frames * padded.dim, 0.0);
      std::copy(src.values.begin(), src.values.end(), padded.values.begin());
      batch.source_features.push_back(std::move(padded));
    } else {
      TokenIds row = std::get<TokenIds>(ex.source);
      row.resize(batch.source_extent, Vocabulary::kPad);
      batch.source_tokens.push_back(std::move(row));
    }

    TokenIds in(batch.target_extent, Vocabulary::kPad);
    TokenIds out(batch.target_extent, Vocabulary::kPad);
    std::vector<double> mask(batch.target_extent, 0.0);
    in[0] = Vocabulary::kBos;
    for (std::size_t t = 0; t < ex.target.size(); ++t) {
      in[t + 1] = ex.target[t];
      out[t] = ex.target[t];
      mask[t] = 1.0;
    }
    out[ex.target.size()] = Vocabulary::kEos;
    mask[ex.target.size()] = 1.0;
    batch.target_in.push_back(std::move(in));
    batch.target_out.push_back(std::move(out));
    batch.target_mask.push_back(std::move(mask));
  }
  return batch;
}

std::vector<Batch> make_batches(const ParallelCorpus& corpus, std::size_t batch_size,
                                std::uint64_t shuffle_seed) {
  if (corpus.examples.empty()) throw DataError("make_batches: empty corpus");
  if (batch_size == 0) throw DataError("make_batches: batch size must be positive");
  const auto order = shuffled_indices(corpus.size(), shuffle_seed);
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    batches.push_back(make_batch(corpus, std::span(order).subspan(start, end - start)));
  }
  return batches;
}

}  // namespace s2t
