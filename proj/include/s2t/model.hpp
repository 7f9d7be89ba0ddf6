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
#include <optional>
#include <string>
#include <vector>

#include "s2t/attention.hpp"
#include "s2t/corpus.hpp"
#include "s2t/encoder.hpp"
#include "s2t/parameters.hpp"

namespace s2t {

enum class TaskKind { kText, kSpeech };

const char* task_kind_name(TaskKind kind);
TaskKind parse_task_kind(const std::string& name);

struct ModelConfig {
  TaskKind task = TaskKind::kText;
  std::size_t units = 256;           // m
  std::size_t embedding_size = 256;  // n
  std::size_t source_vocab = 0;      // text only
  std::size_t target_vocab = 0;      // includes the reserved ids
  std::size_t feature_dim = 41;      // speech only
  std::size_t prenet_size = 256;     // speech only
  std::size_t decoder_layers = 2;
  AttentionKind attention = AttentionKind::kAdditive;
  std::size_t filter_size = 25;
  double dropout = 0.5;

  EncoderConfig encoder() const;
  void validate() const;
};

struct ParameterSpec {
  std::string name;
  Shape shape;
};

/// Every trainable tensor of the configured model, in initialization order.
std::vector<ParameterSpec> parameter_specs(const ModelConfig& config);

/// Glorot-uniform matrices, forget biases 1, other biases 0.
ParameterStore init_parameters(const ModelConfig& config, std::uint64_t seed);

/// Throws DataError unless `store` holds exactly the configured tensors.
void check_parameters(const ModelConfig& config, const ParameterStore& store);

struct Seq2Seq {
  ModelConfig config;
  ParameterStore params;
};

Seq2Seq make_model(const ModelConfig& config, std::uint64_t seed);

/// The model's parameters as nodes of one graph.
struct BoundModel {
  ModelConfig config;
  ad::Var source_embedding;  // [n, V_src], text only
  std::vector<AffineParams> prenet;
  std::vector<EncoderLayerParams> encoder;
  ad::Var init_weight;       // [2m, 2m]
  ad::Var target_embedding;  // [n, V]
  std::vector<LstmParams> decoder;
  AttentionParams attention;
  AffineParams projection;  // [m, 2m]
  AffineParams output;      // [V, m]
};

BoundModel bind_model(const ModelConfig& config, const ParameterLookup& lookup);
BoundModel bind_model(ad::Graph& graph, const Seq2Seq& model);

struct EncodedBatch {
  AttentionMemory memory;
  ad::Var final_state;  // [B, 2m]
  std::vector<std::size_t> lengths;
};

EncodedBatch encode_batch(const BoundModel& model, ad::Graph& graph, const Batch& batch,
                          const DropoutContext* dropout = nullptr);

struct DecoderVars {
  std::vector<LstmState> layers;  // bottom first
  ad::Var previous_weights;       // invalid before the first step
};

/// s0 = tanh(W_init s'_A) split into the top layer's (c, h); lower layers zero.
DecoderVars init_state(const BoundModel& model, ad::Var final_state);

struct StepVars {
  DecoderVars state;
  ad::Var logits;   // [B, V]
  ad::Var weights;  // [B, A]
};

/// One decoder transition for a batch of previous tokens.
StepVars decoder_step(const BoundModel& model, const DecoderVars& state, std::span<const int> previous,
                      const AttentionMemory& memory, const DropoutContext* dropout = nullptr);

/// Teacher-forced negative log-likelihood per real target token.
ad::Var sequence_nll(const BoundModel& model, ad::Graph& graph, const Batch& batch,
                     const DropoutContext* dropout = nullptr);

/// Loss of a batch with dropout off, as a plain number.
double batch_loss(const Seq2Seq& model, const Batch& batch);

struct TrainSettings {
  double learning_rate = 0.001;
  std::uint64_t dropout_seed = 0;
  AdamSettings adam;
};

/// Forward with dropout, backprop and one Adam update. Returns the loss
/// before the update; throws DivergenceError on a non-finite loss or gradient.
double train_step(Seq2Seq& model, const Batch& batch, const TrainSettings& settings);

/// splitmix64 of a base seed combined with a stream index.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// Inference on one source sequence with plain tensors between steps, so that
// search can fork and reorder hypotheses freely.

struct EncodedSource {
  Tensor values;       // [A, m]
  Tensor keys;         // [A, m]
  Tensor final_state;  // [1, 2m]
  std::size_t positions = 0;
  std::size_t source_length = 0;
};

struct DecoderState {
  std::vector<Tensor> c;  // per layer, [1, m]
  std::vector<Tensor> h;
  std::optional<Tensor> previous_weights;  // [1, A]
};

struct StepResult {
  DecoderState state;
  std::vector<double> log_probs;
  std::vector<double> weights;
};

EncodedSource encode_source(const Seq2Seq& model, const Source& source);
DecoderState initial_state(const Seq2Seq& model, const EncodedSource& encoded);
StepResult decode_step(const Seq2Seq& model, const EncodedSource& encoded, const DecoderState& state,
                       int previous_token);

/// Attention weights per output step when feeding `target` followed by EOS.
std::vector<std::vector<double>> teacher_forced_attention(const Seq2Seq& model, const Source& source,
                                                          const TokenIds& target);

}  // namespace s2t
