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
#include <string>

#include "s2t/autodiff.hpp"
#include "s2t/encoder.hpp"

namespace s2t {

enum class AttentionKind { kAdditive, kConvolutional };

const char* attention_kind_name(AttentionKind kind);
AttentionKind parse_attention_kind(const std::string& name);

struct AttentionParams {
  ad::Var w1;      // [m, m]
  ad::Var w2;      // [m, 2m]
  ad::Var b2;      // [m]
  ad::Var v;       // [m]
  ad::Var mu;      // [m], convolutional only
  ad::Var filter;  // [k], k odd, convolutional only

  bool convolutional() const { return filter.valid(); }
  std::size_t units() const { return w1.shape()[0]; }
};

/// Registers `attention.w1/w2/b2/v` and, for the convolutional kind,
/// `attention.mu` and `attention.filter` of length `filter_size`.
void add_attention_parameters(ParameterStore& store, AttentionKind kind, std::size_t units,
                              std::size_t filter_size, std::mt19937_64& rng);
AttentionParams bind_attention(const ParameterLookup& lookup, AttentionKind kind);

/// Encoder outputs laid out for batched scoring: row b*A + i holds h_i of
/// batch row b. Keys cache W1 h_i + b2, which does not depend on the step.
struct AttentionMemory {
  ad::Var values;  // [B*A, m]
  ad::Var keys;    // [B*A, m]
  std::size_t batch = 0;
  std::size_t positions = 0;
  Tensor mask;     // [B, A], 1 on real positions
};

AttentionMemory prepare_attention(const AttentionParams& params, std::span<const ad::Var> outputs,
                                  std::span<const std::size_t> lengths);

/// u_i = v^T tanh(W1 h_i + W2 s + b2) for every position; s is [B, 2m].
ad::Var additive_scores(const AttentionParams& params, const AttentionMemory& memory, ad::Var state);

/// Adds f_i * mu inside the tanh, f = F * a_prev (zero-padded, centered).
/// Without previous weights (first step) f is zero and the result equals
/// additive_scores.
ad::Var convolutional_scores(const AttentionParams& params, const AttentionMemory& memory,
                             ad::Var state, const ad::Var* previous_weights);

struct Attended {
  ad::Var weights;  // [B, A], exactly 0 on masked positions
  ad::Var context;  // [B, m]
};

/// Masked softmax over positions and the weighted sum of encoder outputs.
Attended attend(ad::Var scores, const AttentionMemory& memory);

}  // namespace s2t
