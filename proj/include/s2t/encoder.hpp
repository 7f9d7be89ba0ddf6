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

#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "s2t/autodiff.hpp"
#include "s2t/parameters.hpp"

namespace s2t {

/// Resolves a parameter name to a node on the graph being built.
using ParameterLookup = std::function<ad::Var(const std::string&)>;

/// Inter-layer dropout during training; absent at inference.
struct DropoutContext {
  double rate = 0.0;
  std::mt19937_64* rng = nullptr;

  ad::Var apply(ad::Var x) const { return rng && rate > 0.0 ? ad::dropout(x, rate, *rng) : x; }
};

/// Gate rows are ordered input, forget, candidate, output.
struct LstmParams {
  ad::Var w_input;  // [4m, inputDim]
  ad::Var w_state;  // [4m, m]
  ad::Var bias;     // [4m]

  std::size_t units() const { return w_state.shape()[1]; }
  std::size_t input_dim() const { return w_input.shape()[1]; }
};

struct LstmState {
  ad::Var c;
  ad::Var h;
};

/// Registers `<prefix>.w_input`, `<prefix>.w_state`, `<prefix>.bias` with
/// Glorot-uniform weights, forget-gate bias 1 and other biases 0.
void add_lstm_parameters(ParameterStore& store, const std::string& prefix, std::size_t input_dim,
                         std::size_t units, std::mt19937_64& rng);
LstmParams bind_lstm(const ParameterLookup& lookup, const std::string& prefix);

/// Glorot-uniform matrix of the given [rows, cols] shape.
Tensor glorot_uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng);

/// One LSTM transition for a batch of rows: x [B, inputDim], c/h [B, m].
LstmState lstm_cell_step(const LstmParams& params, ad::Var x, const LstmState& state);

/// Zero state for `batch` rows.
LstmState zero_state(ad::Graph& graph, std::size_t batch, std::size_t units);

/// [B,1] column with 1 where `position < lengths[b]`.
Tensor position_mask(std::span<const std::size_t> lengths, std::size_t position);

struct BidirectionalOutput {
  std::vector<ad::Var> outputs;  // per position: forward + backward hidden, [B, m]
  LstmState final_forward;       // forward state at each row's last real position
};

/// Runs both directions over `inputs` (one [B, inputDim] node per position).
/// Rows shorter than the extent keep their state over padded positions, so
/// results equal per-sequence evaluation.
BidirectionalOutput bidirectional_layer(const LstmParams& forward, const LstmParams& backward,
                                        std::span<const ad::Var> inputs,
                                        std::span<const std::size_t> lengths);

enum class EncoderKind { kText, kSpeech };

struct EncoderConfig {
  EncoderKind kind = EncoderKind::kText;
  std::size_t layers = 2;
  std::size_t units = 256;
  std::vector<std::size_t> subsample_layers;  // 0-based indices reading every other input
  std::vector<std::size_t> prenet_sizes;      // speech only
  double dropout = 0.5;

  static EncoderConfig text(std::size_t units, double dropout = 0.5);
  /// Three layers, the upper two subsampling, with a two-layer prenet.
  static EncoderConfig speech(std::size_t units, std::size_t prenet_size, double dropout = 0.5);

  bool subsamples(std::size_t layer) const;
  /// Shortest input accepted (4 for the speech configuration).
  std::size_t min_input_length() const;
  void validate() const;
};

/// Length after the subsampling layers: each halves with ceiling.
std::size_t encoder_output_length(const EncoderConfig& config, std::size_t input_length);

struct EncoderOutput {
  std::vector<ad::Var> outputs;      // top layer, [B, m] per position
  std::vector<std::size_t> lengths;  // per row, after subsampling
  ad::Var final_state;               // [B, 2m]: top layer forward (c, h)
};

struct EncoderLayerParams {
  LstmParams forward;
  LstmParams backward;
};

EncoderOutput pyramidal_encode(const EncoderConfig& config, std::span<const EncoderLayerParams> layers,
                               std::span<const ad::Var> inputs, std::span<const std::size_t> lengths,
                               const DropoutContext* dropout = nullptr);

struct AffineParams {
  ad::Var weight;  // [out, in]
  ad::Var bias;    // [out]
};

/// tanh(W2 tanh(W1 x + b1) + b2), applied row-wise to x [B, in].
ad::Var speech_prenet(std::span<const AffineParams> layers, ad::Var frames);

}  // namespace s2t
