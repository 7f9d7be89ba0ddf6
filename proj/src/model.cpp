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

#include "s2t/model.hpp"

#include <cmath>
#include <random>

#include "s2t/errors.hpp"

namespace s2t {

const char* task_kind_name(TaskKind kind) { return kind == TaskKind::kText ? "text" : "speech"; }

TaskKind parse_task_kind(const std::string& name) {
  if (name == "text") return TaskKind::kText;
  if (name == "speech") return TaskKind::kSpeech;
  throw DataError("unknown task kind '" + name + "'");
}

EncoderConfig ModelConfig::encoder() const {
  return task == TaskKind::kText ? EncoderConfig::text(units, dropout)
                                 : EncoderConfig::speech(units, prenet_size, dropout);
}

void ModelConfig::validate() const {
  if (units == 0 || embedding_size == 0) throw DataError("model sizes must be positive");
  if (target_vocab <= static_cast<std::size_t>(Vocabulary::kReserved)) throw DataError("target vocabulary has no regular tokens");
  if (task == TaskKind::kText && source_vocab <= static_cast<std::size_t>(Vocabulary::kReserved)) {
    throw DataError("source vocabulary has no regular tokens");
  }
  if (task == TaskKind::kSpeech && (feature_dim == 0 || prenet_size == 0)) {
    throw DataError("speech model needs positive feature and prenet sizes");
  }
  if (decoder_layers == 0) throw DataError("decoder needs at least one layer");
  if (attention == AttentionKind::kConvolutional && filter_size % 2 == 0) {
    throw DataError("attention filter size must be odd");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw DataError("dropout rate must lie in [0, 1)");
}

namespace {

std::string encoder_prefix(std::size_t layer, bool forward) {
  return "encoder." + std::to_string(layer) + (forward ? ".fwd" : ".bwd");
}

std::string decoder_prefix(std::size_t layer) { return "decoder.lstm." + std::to_string(layer); }

}  // namespace

ParameterStore init_parameters(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  ParameterStore store;
  const std::size_t m = config.units, n = config.embedding_size;
  std::size_t dim = 0;
  if (config.task == TaskKind::kText) {
    store.add("src_embedding", glorot_uniform(n, config.source_vocab, rng));
    dim = n;
  } else {
    dim = config.feature_dim;
    for (std::size_t l = 0; l < 2; ++l) {
      const std::string p = "prenet." + std::to_string(l);
      store.add(p + ".weight", glorot_uniform(config.prenet_size, dim, rng));
      store.add(p + ".bias", Tensor({config.prenet_size}));
      dim = config.prenet_size;
    }
  }
  const auto enc = config.encoder();
  for (std::size_t l = 0; l < enc.layers; ++l) {
    add_lstm_parameters(store, encoder_prefix(l, true), dim, m, rng);
    add_lstm_parameters(store, encoder_prefix(l, false), dim, m, rng);
    dim = m;
  }
  store.add("decoder.init.weight", glorot_uniform(2 * m, 2 * m, rng));
  store.add("decoder.embedding", glorot_uniform(n, config.target_vocab, rng));
  for (std::size_t l = 0; l < config.decoder_layers; ++l) {
    add_lstm_parameters(store, decoder_prefix(l), l == 0 ? n : m, m, rng);
  }
  add_attention_parameters(store, config.attention, m, config.filter_size, rng);
  store.add("decoder.proj.weight", glorot_uniform(m, 2 * m, rng));
  store.add("decoder.proj.bias", Tensor({m}));
  store.add("decoder.out.weight", glorot_uniform(config.target_vocab, m, rng));
  store.add("decoder.out.bias", Tensor({config.target_vocab}));
  return store;
}

std::vector<ParameterSpec> parameter_specs(const ModelConfig& config) {
  const auto store = init_parameters(config, 0);
  std::vector<ParameterSpec> specs;
  for (const auto& [name, entry] : store.entries()) specs.push_back({name, entry.value.shape()});
  return specs;
}

void check_parameters(const ModelConfig& config, const ParameterStore& store) {
  const auto specs = parameter_specs(config);
  if (specs.size() != store.entries().size()) {
    throw DataError("checkpoint holds " + std::to_string(store.entries().size()) +
                    " parameters, configuration expects " + std::to_string(specs.size()));
  }
  for (const auto& spec : specs) {
    if (!store.contains(spec.name)) throw DataError("missing parameter '" + spec.name + "'");
    const auto& shape = store.value(spec.name).shape();
    if (shape != spec.shape) {
      throw DataError("parameter '" + spec.name + "' has shape " + shape_to_string(shape) + ", expected " +
                      shape_to_string(spec.shape));
    }
  }
}

Seq2Seq make_model(const ModelConfig& config, std::uint64_t seed) {
  return {config, init_parameters(config, seed)};
}

BoundModel bind_model(const ModelConfig& config, const ParameterLookup& lookup) {
  BoundModel b;
  b.config = config;
  if (config.task == TaskKind::kText) {
    b.source_embedding = lookup("src_embedding");
  } else {
    for (std::size_t l = 0; l < 2; ++l) {
      const std::string p = "prenet." + std::to_string(l);
      b.prenet.push_back({lookup(p + ".weight"), lookup(p + ".bias")});
    }
  }
  const auto enc = config.encoder();
  for (std::size_t l = 0; l < enc.layers; ++l) {
    b.encoder.push_back({bind_lstm(lookup, encoder_prefix(l, true)), bind_lstm(lookup, encoder_prefix(l, false))});
  }
  b.init_weight = lookup("decoder.init.weight");
  b.target_embedding = lookup("decoder.embedding");
  for (std::size_t l = 0; l < config.decoder_layers; ++l) b.decoder.push_back(bind_lstm(lookup, decoder_prefix(l)));
  b.attention = bind_attention(lookup, config.attention);
  b.projection = {lookup("decoder.proj.weight"), lookup("decoder.proj.bias")};
  b.output = {lookup("decoder.out.weight"), lookup("decoder.out.bias")};
  return b;
}

BoundModel bind_model(ad::Graph& graph, const Seq2Seq& model) {
  return bind_model(model.config, [&](const std::string& name) { return model.params.bind(graph, name); });
}

EncodedBatch encode_batch(const BoundModel& model, ad::Graph& graph, const Batch& batch,
                          const DropoutContext* dropout) {
  const auto& config = model.config;
  const auto enc = config.encoder();
  const std::size_t rows = batch.size();
  for (std::size_t b = 0; b < rows; ++b) {
    if (batch.source_lengths[b] < enc.min_input_length()) {
      throw DataError("source item " + std::to_string(batch.indices[b]) + " too short: " +
                      std::to_string(batch.source_lengths[b]) + " < " + std::to_string(enc.min_input_length()));
    }
  }
  std::vector<ad::Var> inputs;
  inputs.reserve(batch.source_extent);
  if (config.task == TaskKind::kText) {
    if (batch.is_speech()) throw DataError("text model given speech features");
    for (std::size_t i = 0; i < batch.source_extent; ++i) {
      std::vector<int> ids(rows);
      for (std::size_t b = 0; b < rows; ++b) {
        ids[b] = batch.source_tokens[b][i];
        if (ids[b] < 0 || static_cast<std::size_t>(ids[b]) >= config.source_vocab) {
          throw DataError("source token id " + std::to_string(ids[b]) + " out of range");
        }
      }
      inputs.push_back(ad::embedding(model.source_embedding, std::move(ids)));
    }
  } else {
    if (!batch.is_speech()) throw DataError("speech model given token input");
    for (std::size_t b = 0; b < rows; ++b) {
      if (batch.source_features[b].dim != config.feature_dim) {
        throw DataError("feature dimension " + std::to_string(batch.source_features[b].dim) + ", model expects " +
                        std::to_string(config.feature_dim));
      }
    }
    for (std::size_t i = 0; i < batch.source_extent; ++i) {
      Tensor frame({rows, config.feature_dim});
      for (std::size_t b = 0; b < rows; ++b) {
        const auto& f = batch.source_features[b];
        if (i >= f.frames) continue;
        auto row = f.row(i);
        std::copy(row.begin(), row.end(), frame.raw() + b * config.feature_dim);
      }
      inputs.push_back(speech_prenet(model.prenet, graph.constant(std::move(frame))));
    }
  }
  auto out = pyramidal_encode(enc, model.encoder, inputs, batch.source_lengths, dropout);
  EncodedBatch encoded;
  encoded.memory = prepare_attention(model.attention, out.outputs, out.lengths);
  encoded.final_state = out.final_state;
  encoded.lengths = std::move(out.lengths);
  return encoded;
}

DecoderVars init_state(const BoundModel& model, ad::Var final_state) {
  const std::size_t m = model.config.units;
  if (final_state.shape().size() != 2 || final_state.shape()[1] != 2 * m) {
    throw ShapeError("init_state: encoder state " + shape_to_string(final_state.shape()) + " for " +
                     std::to_string(m) + " units");
  }
  ad::Graph& g = *final_state.graph;
  const std::size_t rows = final_state.shape()[0];
  auto s0 = ad::tanh(ad::matmul_nt(final_state, model.init_weight));
  DecoderVars state;
  for (std::size_t l = 0; l + 1 < model.decoder.size(); ++l) state.layers.push_back(zero_state(g, rows, m));
  state.layers.push_back({ad::slice(s0, 0, m), ad::slice(s0, m, 2 * m)});
  return state;
}

StepVars decoder_step(const BoundModel& model, const DecoderVars& state, std::span<const int> previous,
                      const AttentionMemory& memory, const DropoutContext* dropout) {
  const std::size_t vocab = model.config.target_vocab;
  if (state.layers.size() != model.decoder.size()) {
    throw ShapeError("decoder_step: state has " + std::to_string(state.layers.size()) + " layers, model " +
                     std::to_string(model.decoder.size()));
  }
  for (int id : previous) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw DataError("target token id " + std::to_string(id) + " out of range for vocabulary of " +
                      std::to_string(vocab));
    }
  }
  StepVars out;
  ad::Var x = ad::embedding(model.target_embedding, std::vector<int>(previous.begin(), previous.end()));
  for (std::size_t l = 0; l < model.decoder.size(); ++l) {
    if (l > 0 && dropout) x = dropout->apply(x);
    out.state.layers.push_back(lstm_cell_step(model.decoder[l], x, state.layers[l]));
    x = out.state.layers.back().h;
  }
  const auto& top = out.state.layers.back();
  const ad::Var s_parts[] = {top.c, top.h};
  auto s = ad::concat(s_parts);
  auto scores = model.attention.convolutional()
                    ? convolutional_scores(model.attention, memory, s,
                                           state.previous_weights.valid() ? &state.previous_weights : nullptr)
                    : additive_scores(model.attention, memory, s);
  auto attended = attend(scores, memory);
  const ad::Var y_parts[] = {top.h, attended.context};
  auto y = ad::add(ad::matmul_nt(ad::concat(y_parts), model.projection.weight), model.projection.bias);
  out.logits = ad::add(ad::matmul_nt(y, model.output.weight), model.output.bias);
  out.weights = attended.weights;
  out.state.previous_weights = attended.weights;
  return out;
}

ad::Var sequence_nll(const BoundModel& model, ad::Graph& graph, const Batch& batch, const DropoutContext* dropout) {
  const std::size_t rows = batch.size();
  double real_tokens = 0.0;
  for (std::size_t b = 0; b < rows; ++b) {
    double row_tokens = 0.0;
    for (double v : batch.target_mask[b]) row_tokens += v;
    if (row_tokens <= 1.0) throw DataError("empty target for item " + std::to_string(batch.indices[b]));
    real_tokens += row_tokens;
  }
  auto encoded = encode_batch(model, graph, batch, dropout);
  DecoderVars state = init_state(model, encoded.final_state);
  std::vector<ad::Var> terms;
  terms.reserve(batch.target_extent);
  std::vector<int> previous(rows), expected(rows);
  for (std::size_t t = 0; t < batch.target_extent; ++t) {
    Tensor mask({rows, 1});
    for (std::size_t b = 0; b < rows; ++b) {
      previous[b] = batch.target_in[b][t];
      expected[b] = batch.target_out[b][t];
      mask[b] = batch.target_mask[b][t];
    }
    auto step = decoder_step(model, state, previous, encoded.memory, dropout);
    auto picked = ad::pick(ad::log_softmax(step.logits), expected);
    terms.push_back(ad::mul(picked, graph.constant(std::move(mask))));
    state = std::move(step.state);
  }
  return ad::scale(ad::sum(ad::interleave_rows(terms)), -1.0 / real_tokens);
}

double batch_loss(const Seq2Seq& model, const Batch& batch) {
  ad::Graph g;
  auto bound = bind_model(g, model);
  return sequence_nll(bound, g, batch).value()[0];
}

double train_step(Seq2Seq& model, const Batch& batch, const TrainSettings& settings) {
  const std::uint64_t step = model.params.step() + 1;
  double loss = 0.0;
  std::map<std::string, Tensor> grads;
  {
    ad::Graph g;
    auto bound = bind_model(g, model);
    std::mt19937_64 rng(settings.dropout_seed);
    DropoutContext dropout{model.config.dropout, &rng};
    auto nll = sequence_nll(bound, g, batch, &dropout);
    loss = nll.value()[0];
    if (!std::isfinite(loss)) {
      throw DivergenceError("non-finite training loss at step " + std::to_string(step));
    }
    grads = g.backprop(nll);
  }
  for (const auto& [name, grad] : grads) {
    if (!grad.all_finite()) {
      throw DivergenceError("non-finite gradient for '" + name + "' at step " + std::to_string(step));
    }
  }
  adam_update(model.params, grads, settings.learning_rate, settings.adam);
  return loss;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

Batch single_source_batch(const Source& source) {
  ParallelCorpus corpus;
  corpus.examples.push_back({source, {}});
  const std::size_t index = 0;
  return make_batch(corpus, std::span<const std::size_t>(&index, 1));
}

}  // namespace

EncodedSource encode_source(const Seq2Seq& model, const Source& source) {
  ad::Graph g;
  auto bound = bind_model(g, model);
  auto batch = single_source_batch(source);
  auto encoded = encode_batch(bound, g, batch);
  EncodedSource out;
  out.values = encoded.memory.values.value();
  out.keys = encoded.memory.keys.value();
  out.final_state = encoded.final_state.value();
  out.positions = encoded.memory.positions;
  out.source_length = batch.source_lengths[0];
  return out;
}

DecoderState initial_state(const Seq2Seq& model, const EncodedSource& encoded) {
  ad::Graph g;
  auto bound = bind_model(g, model);
  auto vars = init_state(bound, g.constant(encoded.final_state));
  DecoderState state;
  for (const auto& layer : vars.layers) {
    state.c.push_back(layer.c.value());
    state.h.push_back(layer.h.value());
  }
  return state;
}

StepResult decode_step(const Seq2Seq& model, const EncodedSource& encoded, const DecoderState& state,
                       int previous_token) {
  ad::Graph g;
  auto bound = bind_model(g, model);
  AttentionMemory memory;
  memory.values = g.constant(encoded.values);
  memory.keys = g.constant(encoded.keys);
  memory.batch = 1;
  memory.positions = encoded.positions;
  memory.mask = Tensor({1, encoded.positions}, 1.0);
  DecoderVars vars;
  for (std::size_t l = 0; l < state.c.size(); ++l) vars.layers.push_back({g.constant(state.c[l]), g.constant(state.h[l])});
  if (state.previous_weights) vars.previous_weights = g.constant(*state.previous_weights);
  const int prev[] = {previous_token};
  auto step = decoder_step(bound, vars, prev, memory);
  auto log_probs = ad::log_softmax(step.logits);

  StepResult result;
  for (const auto& layer : step.state.layers) {
    result.state.c.push_back(layer.c.value());
    result.state.h.push_back(layer.h.value());
  }
  result.state.previous_weights = step.weights.value();
  const auto lp = log_probs.value().data();
  result.log_probs.assign(lp.begin(), lp.end());
  const auto w = step.weights.value().data();
  result.weights.assign(w.begin(), w.end());
  return result;
}

std::vector<std::vector<double>> teacher_forced_attention(const Seq2Seq& model, const Source& source,
                                                          const TokenIds& target) {
  const auto encoded = encode_source(model, source);
  DecoderState state = initial_state(model, encoded);
  std::vector<std::vector<double>> rows;
  int previous = Vocabulary::kBos;
  for (std::size_t t = 0; t <= target.size(); ++t) {
    auto step = decode_step(model, encoded, state, previous);
    rows.push_back(std::move(step.weights));
    state = std::move(step.state);
    if (t < target.size()) previous = target[t];
  }
  return rows;
}

}  // namespace s2t
