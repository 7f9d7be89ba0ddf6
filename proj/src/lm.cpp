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

#include "s2t/lm.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "s2t/errors.hpp"

namespace s2t {

namespace {

constexpr const char* kMagic = "s2t-trigram";

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

TrigramModel TrigramModel::train(std::span<const TokenIds> corpus, std::size_t vocab_size,
                                 const Lambdas& lambdas) {
  const double sum = lambdas[0] + lambdas[1] + lambdas[2];
  if (lambdas[0] <= 0 || lambdas[1] <= 0 || lambdas[2] <= 0 || std::abs(sum - 1.0) > 1e-12) {
    throw DataError("trigram interpolation weights must be positive and sum to 1");
  }
  if (vocab_size == 0) throw DataError("trigram model needs a nonempty vocabulary");
  TrigramModel m;
  m.lambdas_ = lambdas;
  m.vocab_size_ = vocab_size;
  for (const auto& sentence : corpus) {
    int u = Vocabulary::kBos, v = Vocabulary::kBos;
    for (std::size_t t = 0; t <= sentence.size(); ++t) {
      const int w = t < sentence.size() ? sentence[t] : Vocabulary::kEos;
      if (w < 0 || static_cast<std::size_t>(w) >= vocab_size) {
        throw DataError("token id " + std::to_string(w) + " outside the LM vocabulary");
      }
      ++m.unigrams_[w];
      ++m.bigrams_[{v, w}];
      ++m.trigrams_[{u, v, w}];
      u = v;
      v = w;
    }
  }
  m.index_contexts();
  return m;
}

void TrigramModel::index_contexts() {
  total_ = 0;
  for (const auto& [w, c] : unigrams_) total_ += c;
  bigram_contexts_.clear();
  trigram_contexts_.clear();
  for (const auto& [k, c] : bigrams_) bigram_contexts_[k[0]] += c;
  for (const auto& [k, c] : trigrams_) trigram_contexts_[{k[0], k[1]}] += c;
}

double TrigramModel::prob(int u, int v, int w) const {
  if (total_ == 0) throw DataError("trigram model has no counts");
  double p = 0.0;
  if (auto ctx = trigram_contexts_.find({u, v}); ctx != trigram_contexts_.end()) {
    if (auto it = trigrams_.find({u, v, w}); it != trigrams_.end()) {
      p += lambdas_[2] * static_cast<double>(it->second) / static_cast<double>(ctx->second);
    }
  }
  if (auto ctx = bigram_contexts_.find(v); ctx != bigram_contexts_.end()) {
    if (auto it = bigrams_.find({v, w}); it != bigrams_.end()) {
      p += lambdas_[1] * static_cast<double>(it->second) / static_cast<double>(ctx->second);
    }
  }
  const auto total = static_cast<double>(total_);
  if (auto it = unigrams_.find(w); it != unigrams_.end()) {
    p += lambdas_[0] * static_cast<double>(it->second) / total;
  } else {
    p += lambdas_[0] / (static_cast<double>(vocab_size_) * total);
  }
  return p;
}

double TrigramModel::logprob(int u, int v, int w) const { return std::log(prob(u, v, w)); }

std::vector<double> TrigramModel::next_logprobs(int u, int v) const {
  std::vector<double> out(vocab_size_);
  for (std::size_t w = 0; w < vocab_size_; ++w) out[w] = logprob(u, v, static_cast<int>(w));
  return out;
}

double TrigramModel::sequence_logprob(const TokenIds& tokens) const {
  double total = 0.0;
  int u = Vocabulary::kBos, v = Vocabulary::kBos;
  for (std::size_t t = 0; t <= tokens.size(); ++t) {
    const int w = t < tokens.size() ? tokens[t] : Vocabulary::kEos;
    total += logprob(u, v, w);
    u = v;
    v = w;
  }
  return total;
}

std::vector<int> TrigramModel::observed_ids() const {
  std::vector<int> ids;
  for (const auto& [w, c] : unigrams_) ids.push_back(w);
  return ids;
}

bool TrigramModel::observed_context(int u, int v) const {
  return trigram_contexts_.count({u, v}) != 0 && bigram_contexts_.count(v) != 0;
}

void TrigramModel::write(std::ostream& out) const {
  out << kMagic << "\n";
  out << "order 3\n";
  out << "lambdas " << format_double(lambdas_[0]) << " " << format_double(lambdas_[1]) << " "
      << format_double(lambdas_[2]) << "\n";
  out << "vocab " << vocab_size_ << "\n";
  out << "unigrams " << unigrams_.size() << "\n";
  for (const auto& [w, c] : unigrams_) out << w << " " << c << "\n";
  out << "bigrams " << bigrams_.size() << "\n";
  for (const auto& [k, c] : bigrams_) out << k[0] << " " << k[1] << " " << c << "\n";
  out << "trigrams " << trigrams_.size() << "\n";
  for (const auto& [k, c] : trigrams_) out << k[0] << " " << k[1] << " " << k[2] << " " << c << "\n";
}

namespace {

void expect_word(std::istream& in, const std::string& word) {
  std::string got;
  if (!(in >> got) || got != word) {
    throw DataError("malformed LM file: expected '" + word + "', found '" + got + "'");
  }
}

template <typename T>
T read_value(std::istream& in, const char* what) {
  T v{};
  if (!(in >> v)) throw DataError(std::string("malformed LM file: bad ") + what);
  return v;
}

}  // namespace

TrigramModel TrigramModel::read(std::istream& in) {
  TrigramModel m;
  expect_word(in, kMagic);
  expect_word(in, "order");
  if (read_value<int>(in, "order") != 3) throw DataError("unsupported LM order");
  expect_word(in, "lambdas");
  for (auto& l : m.lambdas_) {
    const auto text = read_value<std::string>(in, "lambda");
    try {
      l = std::stod(text);
    } catch (const std::exception&) {
      throw DataError("malformed LM file: bad lambda '" + text + "'");
    }
  }
  expect_word(in, "vocab");
  m.vocab_size_ = read_value<std::size_t>(in, "vocabulary size");
  expect_word(in, "unigrams");
  for (auto n = read_value<std::size_t>(in, "count"); n > 0; --n) {
    const int w = read_value<int>(in, "id");
    m.unigrams_[w] = read_value<std::uint64_t>(in, "count");
  }
  expect_word(in, "bigrams");
  for (auto n = read_value<std::size_t>(in, "count"); n > 0; --n) {
    std::array<int, 2> k{read_value<int>(in, "id"), read_value<int>(in, "id")};
    m.bigrams_[k] = read_value<std::uint64_t>(in, "count");
  }
  expect_word(in, "trigrams");
  for (auto n = read_value<std::size_t>(in, "count"); n > 0; --n) {
    std::array<int, 3> k{};
    for (auto& id : k) id = read_value<int>(in, "id");
    m.trigrams_[k] = read_value<std::uint64_t>(in, "count");
  }
  m.index_contexts();
  return m;
}

void TrigramModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write LM file " + path);
  write(out);
  if (!out) throw DataError("failed writing LM file " + path);
}

TrigramModel TrigramModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open LM file " + path);
  return read(in);
}

TrigramModel train_trigram(std::span<const TokenIds> corpus, std::size_t vocab_size) {
  return TrigramModel::train(corpus, vocab_size);
}

double lm_logprob(const TrigramModel& model, const TokenIds& tokens) { return model.sequence_logprob(tokens); }

}  // namespace s2t
