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

#include "s2t/attention.hpp"

#include "s2t/errors.hpp"

namespace s2t {

const char* attention_kind_name(AttentionKind kind) {
  return kind == AttentionKind::kAdditive ? "additive" : "convolutional";
}

AttentionKind parse_attention_kind(const std::string& name) {
  if (name == "additive") return AttentionKind::kAdditive;
  if (name == "convolutional" || name == "conv") return AttentionKind::kConvolutional;
  throw ShapeError("unknown attention kind '" + name + "'");
}

void add_attention_parameters(ParameterStore& store, AttentionKind kind, std::size_t units,
                              std::size_t filter_size, std::mt19937_64& rng) {
  store.add("attention.w1", glorot_uniform(units, units, rng));
  store.add("attention.w2", glorot_uniform(units, 2 * units, rng));
  store.add("attention.b2", Tensor({units}));
  store.add("attention.v", glorot_uniform(1, units, rng).reshaped({units}));
  if (kind == AttentionKind::kConvolutional) {
    if (filter_size % 2 == 0) throw ShapeError("attention filter size must be odd");
    store.add("attention.mu", glorot_uniform(1, units, rng).reshaped({units}));
    store.add("attention.filter", glorot_uniform(1, filter_size, rng).reshaped({filter_size}));
  }
}

AttentionParams bind_attention(const ParameterLookup& lookup, AttentionKind kind) {
  AttentionParams p{lookup("attention.w1"), lookup("attention.w2"), lookup("attention.b2"),
                    lookup("attention.v"), {}, {}};
  if (kind == AttentionKind::kConvolutional) {
    p.mu = lookup("attention.mu");
    p.filter = lookup("attention.filter");
  }
  return p;
}

AttentionMemory prepare_attention(const AttentionParams& params, std::span<const ad::Var> outputs,
                                  std::span<const std::size_t> lengths) {
  if (outputs.empty()) throw ShapeError("attention over an empty sequence");
  AttentionMemory mem;
  mem.batch = outputs[0].shape()[0];
  mem.positions = outputs.size();
  if (lengths.size() != mem.batch) throw ShapeError("attention: one length per batch row required");
  mem.values = ad::interleave_rows(outputs);
  mem.keys = ad::add(ad::matmul_nt(mem.values, params.w1), params.b2);
  mem.mask = Tensor({mem.batch, mem.positions});
  for (std::size_t b = 0; b < mem.batch; ++b)
    for (std::size_t i = 0; i < mem.positions && i < lengths[b]; ++i) mem.mask.at(b, i) = 1.0;
  return mem;
}

namespace {

ad::Var project_scores(const AttentionParams& params, const AttentionMemory& memory, ad::Var pre) {
  const std::size_t m = params.units();
  auto u = ad::matmul_nt(ad::tanh(pre), ad::reshape(params.v, {1, m}));
  return ad::reshape(u, {memory.batch, memory.positions});
}

ad::Var state_term(const AttentionParams& params, const AttentionMemory& memory, ad::Var state) {
  if (state.shape() != Shape{memory.batch, 2 * params.units()}) {
    throw ShapeError("attention: decoder state " + shape_to_string(state.shape()) + " for " +
                     std::to_string(memory.batch) + " rows of " + std::to_string(params.units()) +
                     " units");
  }
  return ad::add(memory.keys, ad::repeat_rows(ad::matmul_nt(state, params.w2), memory.positions));
}

}  // namespace

ad::Var additive_scores(const AttentionParams& params, const AttentionMemory& memory, ad::Var state) {
  return project_scores(params, memory, state_term(params, memory, state));
}

ad::Var convolutional_scores(const AttentionParams& params, const AttentionMemory& memory,
                             ad::Var state, const ad::Var* previous_weights) {
  if (!params.convolutional()) throw ShapeError("convolutional_scores: missing filter and mu");
  auto pre = state_term(params, memory, state);
  if (previous_weights) {
    if (previous_weights->shape() != Shape{memory.batch, memory.positions}) {
      throw ShapeError("convolutional_scores: previous weights " +
                       shape_to_string(previous_weights->shape()) + " for " +
                       std::to_string(memory.positions) + " positions");
    }
    auto f = ad::reshape(ad::conv_same(*previous_weights, params.filter),
                         {memory.batch * memory.positions, 1});
    pre = ad::add(pre, ad::matmul(f, ad::reshape(params.mu, {1, params.units()})));
  }
  return project_scores(params, memory, pre);
}

Attended attend(ad::Var scores, const AttentionMemory& memory) {
  if (scores.shape() != Shape{memory.batch, memory.positions}) {
    throw ShapeError("attend: scores " + shape_to_string(scores.shape()) + " for memory of " +
                     std::to_string(memory.positions) + " positions");
  }
  auto a = ad::masked_softmax(scores, memory.mask);
  auto weighted = ad::mul(memory.values, ad::reshape(a, {memory.batch * memory.positions, 1}));
  return {a, ad::sum_row_groups(weighted, memory.positions)};
}

}  // namespace s2t
