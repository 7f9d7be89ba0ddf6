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

#include "s2t/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "s2t/errors.hpp"

namespace s2t {

Tensor glorot_uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Tensor t({rows, cols});
  for (auto& v : t.data()) v = (2.0 * ad::uniform01(rng) - 1.0) * limit;
  return t;
}

void add_lstm_parameters(ParameterStore& store, const std::string& prefix, std::size_t input_dim,
                         std::size_t units, std::mt19937_64& rng) {
  store.add(prefix + ".w_input", glorot_uniform(4 * units, input_dim, rng));
  store.add(prefix + ".w_state", glorot_uniform(4 * units, units, rng));
  Tensor bias({4 * units});
  for (std::size_t i = units; i < 2 * units; ++i) bias[i] = 1.0;
  store.add(prefix + ".bias", std::move(bias));
}

LstmParams bind_lstm(const ParameterLookup& lookup, const std::string& prefix) {
  return {lookup(prefix + ".w_input"), lookup(prefix + ".w_state"), lookup(prefix + ".bias")};
}

LstmState lstm_cell_step(const LstmParams& p, ad::Var x, const LstmState& state) {
  const std::size_t m = p.units();
  if (x.shape().size() != 2 || x.shape()[1] != p.input_dim()) {
    throw ShapeError("lstm_cell_step: input " + shape_to_string(x.shape()) + " for input size " +
                     std::to_string(p.input_dim()));
  }
  if (state.h.shape() != Shape{x.shape()[0], m} || state.c.shape() != state.h.shape()) {
    throw ShapeError("lstm_cell_step: state " + shape_to_string(state.h.shape()) + " for " +
                     std::to_string(m) + " units");
  }
  auto gates = ad::add(ad::add(ad::matmul_nt(x, p.w_input), ad::matmul_nt(state.h, p.w_state)), p.bias);
  auto i = ad::sigmoid(ad::slice(gates, 0, m));
  auto f = ad::sigmoid(ad::slice(gates, m, 2 * m));
  auto g = ad::tanh(ad::slice(gates, 2 * m, 3 * m));
  auto o = ad::sigmoid(ad::slice(gates, 3 * m, 4 * m));
  auto c = ad::add(ad::mul(f, state.c), ad::mul(i, g));
  auto h = ad::mul(o, ad::tanh(c));
  return {c, h};
}

LstmState zero_state(ad::Graph& graph, std::size_t batch, std::size_t units) {
  auto zeros = graph.constant(Tensor({batch, units}));
  return {zeros, zeros};
}

Tensor position_mask(std::span<const std::size_t> lengths, std::size_t position) {
  Tensor mask({lengths.size(), 1});
  for (std::size_t b = 0; b < lengths.size(); ++b) mask[b] = position < lengths[b] ? 1.0 : 0.0;
  return mask;
}

namespace {

// Keeps the previous state on rows whose mask is 0.
LstmState masked_step(const LstmParams& p, ad::Var x, const LstmState& state, const Tensor& mask) {
  LstmState next = lstm_cell_step(p, x, state);
  bool all_real = true;
  for (double m : mask.data()) all_real = all_real && m == 1.0;
  if (all_real) return next;
  ad::Graph& g = *x.graph;
  Tensor inverse = mask;
  for (auto& v : inverse.data()) v = 1.0 - v;
  auto keep = g.constant(mask);
  auto hold = g.constant(std::move(inverse));
  return {ad::add(ad::mul(next.c, keep), ad::mul(state.c, hold)),
          ad::add(ad::mul(next.h, keep), ad::mul(state.h, hold))};
}

}  // namespace

BidirectionalOutput bidirectional_layer(const LstmParams& forward, const LstmParams& backward,
                                        std::span<const ad::Var> inputs,
                                        std::span<const std::size_t> lengths) {
  if (inputs.empty()) throw ShapeError("bidirectional_layer: empty sequence");
  const std::size_t extent = inputs.size();
  const std::size_t batch = inputs[0].shape()[0];
  if (lengths.size() != batch) throw ShapeError("bidirectional_layer: one length per row required");
  ad::Graph& g = *inputs[0].graph;
  const std::size_t m = forward.units();

  std::vector<Tensor> masks;
  masks.reserve(extent);
  for (std::size_t i = 0; i < extent; ++i) masks.push_back(position_mask(lengths, i));

  std::vector<ad::Var> fwd(extent);
  LstmState state = zero_state(g, batch, m);
  for (std::size_t i = 0; i < extent; ++i) {
    state = masked_step(forward, inputs[i], state, masks[i]);
    fwd[i] = state.h;
  }
  BidirectionalOutput out;
  out.final_forward = state;

  out.outputs.resize(extent);
  state = zero_state(g, batch, backward.units());
  for (std::size_t i = extent; i-- > 0;) {
    state = masked_step(backward, inputs[i], state, masks[i]);
    out.outputs[i] = ad::add(fwd[i], state.h);
  }
  return out;
}

EncoderConfig EncoderConfig::text(std::size_t units, double dropout) {
  EncoderConfig c;
  c.kind = EncoderKind::kText;
  c.layers = 2;
  c.units = units;
  c.dropout = dropout;
  return c;
}

EncoderConfig EncoderConfig::speech(std::size_t units, std::size_t prenet_size, double dropout) {
  EncoderConfig c;
  c.kind = EncoderKind::kSpeech;
  c.layers = 3;
  c.units = units;
  c.subsample_layers = {1, 2};
  c.prenet_sizes = {prenet_size, prenet_size};
  c.dropout = dropout;
  return c;
}

bool EncoderConfig::subsamples(std::size_t layer) const {
  return std::find(subsample_layers.begin(), subsample_layers.end(), layer) != subsample_layers.end();
}

std::size_t EncoderConfig::min_input_length() const {
  return std::size_t{1} << subsample_layers.size();
}

void EncoderConfig::validate() const {
  if (layers == 0 || units == 0) throw ShapeError("encoder needs at least one layer and unit");
  for (auto l : subsample_layers) {
    if (l >= layers) throw ShapeError("subsampling layer index " + std::to_string(l) + " out of range");
  }
  for (auto s : prenet_sizes) {
    if (s == 0) throw ShapeError("prenet layer sizes must be positive");
  }
  if (dropout < 0.0 || dropout >= 1.0) throw ShapeError("dropout rate must lie in [0, 1)");
}

std::size_t encoder_output_length(const EncoderConfig& config, std::size_t input_length) {
  std::size_t len = input_length;
  for (std::size_t l = 0; l < config.layers; ++l) {
    if (config.subsamples(l)) len = (len + 1) / 2;
  }
  return len;
}

EncoderOutput pyramidal_encode(const EncoderConfig& config, std::span<const EncoderLayerParams> layers,
                               std::span<const ad::Var> inputs, std::span<const std::size_t> lengths,
                               const DropoutContext* dropout) {
  if (layers.size() != config.layers) {
    throw ShapeError("pyramidal_encode: " + std::to_string(layers.size()) + " layer parameter sets for " +
                     std::to_string(config.layers) + " layers");
  }
  const std::size_t min_len = config.min_input_length();
  for (auto len : lengths) {
    if (len < min_len) {
      throw ShapeError("pyramidal_encode: input too short (" + std::to_string(len) + " < " +
                       std::to_string(min_len) + ")");
    }
  }
  if (inputs.empty()) throw ShapeError("pyramidal_encode: input too short (empty)");

  std::vector<ad::Var> current(inputs.begin(), inputs.end());
  std::vector<std::size_t> lens(lengths.begin(), lengths.end());
  BidirectionalOutput layer_out;
  for (std::size_t l = 0; l < config.layers; ++l) {
    if (config.subsamples(l)) {
      std::vector<ad::Var> even;
      for (std::size_t i = 0; i < current.size(); i += 2) even.push_back(current[i]);
      current = std::move(even);
      for (auto& len : lens) len = (len + 1) / 2;
    }
    if (l > 0 && dropout) {
      for (auto& v : current) v = dropout->apply(v);
    }
    layer_out = bidirectional_layer(layers[l].forward, layers[l].backward, current, lens);
    current = layer_out.outputs;
  }

  EncoderOutput out;
  out.outputs = std::move(current);
  out.lengths = std::move(lens);
  const ad::Var parts[] = {layer_out.final_forward.c, layer_out.final_forward.h};
  out.final_state = ad::concat(parts);
  return out;
}

ad::Var speech_prenet(std::span<const AffineParams> layers, ad::Var frames) {
  ad::Var x = frames;
  for (const auto& layer : layers) {
    x = ad::tanh(ad::add(ad::matmul_nt(x, layer.weight), layer.bias));
  }
  return x;
}

}  // namespace s2t
