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

#include <cmath>
#include <random>

#include "doctest.h"
#include "lstm_oracle.hpp"
#include "s2t/encoder.hpp"
#include "s2t/errors.hpp"

using namespace s2t;
using s2t::testing::ScalarLstm;
using s2t::testing::Vec;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

struct LstmFixture {
  ParameterStore store;
  ScalarLstm oracle;

  LstmFixture(const std::string& prefix, std::size_t in, std::size_t m, std::mt19937_64& rng,
              double scale = 0.8) {
    store.add(prefix + ".w_input", random_tensor({4 * m, in}, rng, scale));
    store.add(prefix + ".w_state", random_tensor({4 * m, m}, rng, scale));
    store.add(prefix + ".bias", random_tensor({4 * m}, rng, scale));
    oracle = to_oracle(prefix);
  }

  ScalarLstm to_oracle(const std::string& prefix) const {
    ScalarLstm o;
    const auto& wi = store.value(prefix + ".w_input");
    o.units = static_cast<int>(store.value(prefix + ".w_state").shape()[1]);
    o.inputs = static_cast<int>(wi.shape()[1]);
    o.w_input.assign(wi.data().begin(), wi.data().end());
    const auto& ws = store.value(prefix + ".w_state");
    o.w_state.assign(ws.data().begin(), ws.data().end());
    const auto& b = store.value(prefix + ".bias");
    o.bias.assign(b.data().begin(), b.data().end());
    return o;
  }
};

ParameterLookup lookup_in(ad::Graph& g, const ParameterStore& store) {
  return [&g, &store](const std::string& name) { return store.bind(g, name); };
}

Tensor row_tensor(const Vec& v) { return Tensor({1, v.size()}, std::vector<double>(v)); }

std::vector<Vec> random_sequence(std::size_t len, std::size_t dim, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<Vec> xs(len, Vec(dim));
  for (auto& x : xs)
    for (auto& v : x) v = dist(rng);
  return xs;
}

std::size_t enumerate_even_indices(std::size_t len) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < len; ++i)
    if (i % 2 == 0) ++count;
  return count;
}

}  // namespace

TEST_CASE("lstm step with zero weights halves the cell") {
  ParameterStore store;
  store.add("l.w_input", Tensor({8, 3}));
  store.add("l.w_state", Tensor({8, 2}));
  store.add("l.bias", Tensor({8}));
  ad::Graph g;
  auto p = bind_lstm(lookup_in(g, store), "l");
  LstmState s{g.constant(Tensor({1, 2}, 1.0)), g.constant(Tensor({1, 2}))};
  auto next = lstm_cell_step(p, g.constant(Tensor::matrix(1, 3, {0.3, -2, 5})), s);
  for (double c : next.c.value().data()) CHECK(c == doctest::Approx(0.5).epsilon(1e-15));
  for (double h : next.h.value().data()) CHECK(h == doctest::Approx(0.5 * std::tanh(0.5)).epsilon(1e-15));
}

TEST_CASE("lstm two-step sequence matches the scalar oracle") {
  std::mt19937_64 rng(11);
  LstmFixture fx("l", 3, 2, rng);
  auto xs = random_sequence(2, 3, rng);
  ad::Graph g;
  auto p = bind_lstm(lookup_in(g, fx.store), "l");
  LstmState s = zero_state(g, 1, 2);
  Vec c(2, 0.0), h(2, 0.0);
  for (const auto& x : xs) {
    s = lstm_cell_step(p, g.constant(row_tensor(x)), s);
    testing::oracle_step(fx.oracle, x, c, h);
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK(std::abs(s.c.value()[j] - c[j]) < 1e-14);
      CHECK(std::abs(s.h.value()[j] - h[j]) < 1e-14);
    }
  }
}

TEST_CASE("saturated gates hold the memory cell") {
  const std::size_t m = 3;
  ParameterStore store;
  store.add("l.w_input", Tensor({4 * m, 2}));
  store.add("l.w_state", Tensor({4 * m, m}));
  Tensor bias({4 * m});
  for (std::size_t j = 0; j < m; ++j) {
    bias[j] = -10;
    bias[m + j] = 10;
    bias[3 * m + j] = -10;
  }
  store.add("l.bias", bias);
  ad::Graph g;
  auto p = bind_lstm(lookup_in(g, store), "l");
  const Tensor c0 = Tensor::matrix(1, 3, {0.7, -1.0, 0.2});
  LstmState s{g.constant(c0), g.constant(Tensor({1, m}, 0.4))};
  auto next = lstm_cell_step(p, g.constant(Tensor::matrix(1, 2, {1.5, -0.5})), s);
  for (std::size_t j = 0; j < m; ++j) CHECK(std::abs(next.c.value()[j] - c0[j]) < 1e-4);
}

TEST_CASE("lstm step rejects mismatched dimensions") {
  std::mt19937_64 rng(1);
  LstmFixture fx("l", 3, 2, rng);
  ad::Graph g;
  auto p = bind_lstm(lookup_in(g, fx.store), "l");
  CHECK_THROWS_AS(lstm_cell_step(p, g.constant(Tensor({1, 4})), zero_state(g, 1, 2)), ShapeError);
  CHECK_THROWS_AS(lstm_cell_step(p, g.constant(Tensor({1, 3})), zero_state(g, 1, 3)), ShapeError);
}

TEST_CASE("lstm gradients match finite differences") {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t in = 1 + trial % 3, m = 1 + trial % 4, batch = 1 + trial % 2;
    std::map<std::string, Tensor> point{
        {"l.w_input", random_tensor({4 * m, in}, rng)}, {"l.w_state", random_tensor({4 * m, m}, rng)},
        {"l.bias", random_tensor({4 * m}, rng)},        {"x", random_tensor({batch, in}, rng)},
        {"c", random_tensor({batch, m}, rng)},          {"h", random_tensor({batch, m}, rng)}};
    const Tensor wc = random_tensor({batch, m}, rng), wh = random_tensor({batch, m}, rng);
    ScalarFunction f = [&](ad::Graph& g, const std::map<std::string, ad::Var>& v) {
      LstmParams p{v.at("l.w_input"), v.at("l.w_state"), v.at("l.bias")};
      auto s = lstm_cell_step(p, v.at("x"), {v.at("c"), v.at("h")});
      return ad::add(ad::sum(ad::mul(s.c, g.constant(wc))), ad::sum(ad::mul(s.h, g.constant(wh))));
    };
    worst = std::max(worst, gradient_check(f, point, 1e-5));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("bidirectional layer on one element sums both directions") {
  std::mt19937_64 rng(5);
  LstmFixture fwd("f", 2, 3, rng), bwd("b", 2, 3, rng);
  ParameterStore store;
  for (auto* fx : {&fwd, &bwd})
    for (const auto& [name, e] : fx->store.entries()) store.add(name, e.value);
  auto xs = random_sequence(1, 2, rng);
  ad::Graph g;
  auto look = lookup_in(g, store);
  const ad::Var in[] = {g.constant(row_tensor(xs[0]))};
  const std::size_t len[] = {1};
  auto out = bidirectional_layer(bind_lstm(look, "f"), bind_lstm(look, "b"), in, len);
  auto a = testing::oracle_run(fwd.oracle, xs, false);
  auto b = testing::oracle_run(bwd.oracle, xs, true);
  REQUIRE(out.outputs.size() == 1);
  for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(out.outputs[0].value()[j] - (a[0][j] + b[0][j])) < 1e-14);
}

TEST_CASE("bidirectional layer matches two oracle passes") {
  std::mt19937_64 rng(6);
  LstmFixture fwd("f", 2, 2, rng), bwd("b", 2, 2, rng);
  ParameterStore store;
  for (auto* fx : {&fwd, &bwd})
    for (const auto& [name, e] : fx->store.entries()) store.add(name, e.value);
  auto xs = random_sequence(3, 2, rng);
  ad::Graph g;
  auto look = lookup_in(g, store);
  std::vector<ad::Var> in;
  for (const auto& x : xs) in.push_back(g.constant(row_tensor(x)));
  const std::size_t len[] = {3};
  auto out = bidirectional_layer(bind_lstm(look, "f"), bind_lstm(look, "b"), in, len);
  Vec fc, fh;
  auto a = testing::oracle_run(fwd.oracle, xs, false, &fc, &fh);
  auto b = testing::oracle_run(bwd.oracle, xs, true);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(out.outputs[i].value()[j] - (a[i][j] + b[i][j])) < 1e-14);
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(std::abs(out.final_forward.c.value()[j] - fc[j]) < 1e-14);
    CHECK(std::abs(out.final_forward.h.value()[j] - fh[j]) < 1e-14);
  }
}

TEST_CASE("palindromic input with shared direction weights gives palindromic output") {
  std::mt19937_64 rng(8);
  LstmFixture fx("f", 3, 4, rng);
  auto half = random_sequence(3, 3, rng);
  std::vector<Vec> xs = half;
  xs.push_back(random_sequence(1, 3, rng)[0]);
  xs.insert(xs.end(), half.rbegin(), half.rend());
  ad::Graph g;
  auto p = bind_lstm(lookup_in(g, fx.store), "f");
  std::vector<ad::Var> in;
  for (const auto& x : xs) in.push_back(g.constant(row_tensor(x)));
  const std::size_t len[] = {xs.size()};
  auto out = bidirectional_layer(p, p, in, len);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto& l = out.outputs[i].value();
    const auto& r = out.outputs[xs.size() - 1 - i].value();
    for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(l[j] - r[j]) < 1e-13);
  }
}

TEST_CASE("bidirectional layer rejects an empty sequence") {
  std::mt19937_64 rng(1);
  LstmFixture fx("f", 2, 2, rng);
  ad::Graph g;
  auto p = bind_lstm(lookup_in(g, fx.store), "f");
  CHECK_THROWS_AS(bidirectional_layer(p, p, {}, {}), ShapeError);
}

TEST_CASE("speech output length follows the even-index law") {
  const auto cfg = EncoderConfig::speech(8, 8);
  CHECK(encoder_output_length(cfg, 16) == 4);
  CHECK(encoder_output_length(cfg, 13) == 4);
  CHECK(encoder_output_length(EncoderConfig::text(8), 9) == 9);
  for (std::size_t a = 4; a <= 200; ++a) {
    CHECK(encoder_output_length(cfg, a) == enumerate_even_indices(enumerate_even_indices(a)));
  }
}

namespace {

struct EncoderFixture {
  EncoderConfig config;
  ParameterStore store;
  std::size_t input_dim;

  EncoderFixture(EncoderConfig c, std::size_t in, std::uint64_t seed) : config(std::move(c)), input_dim(in) {
    std::mt19937_64 rng(seed);
    std::size_t dim = in;
    for (std::size_t l = 0; l < config.layers; ++l) {
      add_lstm_parameters(store, "enc." + std::to_string(l) + ".fwd", dim, config.units, rng);
      add_lstm_parameters(store, "enc." + std::to_string(l) + ".bwd", dim, config.units, rng);
      dim = config.units;
    }
  }

  EncoderOutput run(ad::Graph& g, const std::vector<std::vector<Vec>>& seqs, const DropoutContext* drop = nullptr) const {
    auto look = lookup_in(g, store);
    std::vector<EncoderLayerParams> layers;
    for (std::size_t l = 0; l < config.layers; ++l) {
      layers.push_back({bind_lstm(look, "enc." + std::to_string(l) + ".fwd"),
                        bind_lstm(look, "enc." + std::to_string(l) + ".bwd")});
    }
    std::size_t extent = 0;
    std::vector<std::size_t> lengths;
    for (const auto& s : seqs) {
      extent = std::max(extent, s.size());
      lengths.push_back(s.size());
    }
    std::vector<ad::Var> inputs;
    for (std::size_t i = 0; i < extent; ++i) {
      Tensor t({seqs.size(), input_dim});
      for (std::size_t b = 0; b < seqs.size(); ++b)
        if (i < seqs[b].size())
          for (std::size_t k = 0; k < input_dim; ++k) t.at(b, k) = seqs[b][i][k];
      inputs.push_back(g.constant(std::move(t)));
    }
    return pyramidal_encode(config, layers, inputs, lengths, drop);
  }
};

void check_padding_invariance(const EncoderFixture& fx, const std::vector<std::size_t>& lens, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<Vec>> seqs;
  for (auto len : lens) seqs.push_back(random_sequence(len, fx.input_dim, rng));
  ad::Graph g;
  auto batched = fx.run(g, seqs);
  const std::size_t m = fx.config.units;
  for (std::size_t b = 0; b < seqs.size(); ++b) {
    ad::Graph gs;
    auto single = fx.run(gs, {seqs[b]});
    REQUIRE(single.lengths[0] == batched.lengths[b]);
    for (std::size_t i = 0; i < single.lengths[0]; ++i)
      for (std::size_t j = 0; j < m; ++j)
        CHECK(std::abs(single.outputs[i].value()[j] - batched.outputs[i].value().at(b, j)) < 1e-12);
    for (std::size_t j = 0; j < 2 * m; ++j)
      CHECK(std::abs(single.final_state.value()[j] - batched.final_state.value().at(b, j)) < 1e-12);
  }
}

}  // namespace

TEST_CASE("text encoder output does not depend on batch padding") {
  EncoderFixture fx(EncoderConfig::text(5, 0.0), 4, 17);
  check_padding_invariance(fx, {7, 3, 1, 5}, 3);
}

TEST_CASE("speech encoder output does not depend on batch padding") {
  EncoderFixture fx(EncoderConfig::speech(4, 4, 0.0), 3, 19);
  check_padding_invariance(fx, {13, 4, 9, 16}, 4);
}

TEST_CASE("speech encoder shapes and final state") {
  EncoderFixture fx(EncoderConfig::speech(4, 4, 0.0), 3, 23);
  std::mt19937_64 rng(9);
  ad::Graph g;
  auto out = fx.run(g, {random_sequence(13, 3, rng)});
  CHECK(out.outputs.size() == 4);
  CHECK(out.lengths[0] == 4);
  CHECK(out.final_state.shape() == Shape{1, 8});
}

TEST_CASE("speech encoder rejects inputs shorter than four frames") {
  EncoderFixture fx(EncoderConfig::speech(4, 4, 0.0), 3, 23);
  std::mt19937_64 rng(9);
  ad::Graph g;
  CHECK_THROWS_AS(fx.run(g, {random_sequence(3, 3, rng)}), ShapeError);
}

TEST_CASE("encoding without dropout is deterministic") {
  EncoderFixture fx(EncoderConfig::text(4, 0.5), 3, 29);
  std::mt19937_64 rng(10);
  auto seq = random_sequence(6, 3, rng);
  ad::Graph g1, g2;
  auto a = fx.run(g1, {seq});
  auto b = fx.run(g2, {seq});
  for (std::size_t i = 0; i < a.outputs.size(); ++i) CHECK(a.outputs[i].value() == b.outputs[i].value());
}

TEST_CASE("dropout between layers changes training-time outputs") {
  EncoderFixture fx(EncoderConfig::text(6, 0.5), 3, 31);
  std::mt19937_64 rng(10), drop_rng(77);
  auto seq = random_sequence(6, 3, rng);
  ad::Graph g1, g2;
  DropoutContext drop{0.5, &drop_rng};
  auto a = fx.run(g1, {seq});
  auto b = fx.run(g2, {seq}, &drop);
  bool differs = false;
  for (std::size_t i = 0; i < a.outputs.size(); ++i) differs = differs || !(a.outputs[i].value() == b.outputs[i].value());
  CHECK(differs);
}

TEST_CASE("prenet with zero weights outputs zeros") {
  ad::Graph g;
  const AffineParams layers[] = {{g.constant(Tensor({6, 41})), g.constant(Tensor({6}))},
                                 {g.constant(Tensor({6, 6})), g.constant(Tensor({6}))}};
  std::mt19937_64 rng(3);
  auto y = speech_prenet(layers, g.constant(random_tensor({2, 41}, rng, 5.0)));
  CHECK(y.shape() == Shape{2, 6});
  for (double v : y.value().data()) CHECK(v == 0.0);
}

TEST_CASE("prenet outputs lie strictly inside (-1, 1)") {
  std::mt19937_64 rng(4);
  ad::Graph g;
  const AffineParams layers[] = {{g.constant(random_tensor({8, 41}, rng)), g.constant(random_tensor({8}, rng))},
                                 {g.constant(random_tensor({8, 8}, rng)), g.constant(random_tensor({8}, rng))}};
  auto y = speech_prenet(layers, g.constant(random_tensor({5, 41}, rng, 3.0)));
  for (double v : y.value().data()) CHECK((v > -1.0 && v < 1.0));
}

TEST_CASE("prenet 2x2 instance matches scalar evaluation") {
  ad::Graph g;
  const AffineParams layers[] = {
      {g.constant(Tensor::matrix(2, 2, {0.5, -1.0, 2.0, 0.25})), g.constant(Tensor::vector({0.1, -0.2}))},
      {g.constant(Tensor::matrix(2, 2, {-0.3, 0.8, 1.1, 0.4})), g.constant(Tensor::vector({0.0, 0.5}))}};
  auto y = speech_prenet(layers, g.constant(Tensor::matrix(1, 2, {0.6, -0.9})));
  const double h0 = std::tanh(0.5 * 0.6 - 1.0 * -0.9 + 0.1);
  const double h1 = std::tanh(2.0 * 0.6 + 0.25 * -0.9 - 0.2);
  CHECK(y.value()[0] == doctest::Approx(std::tanh(-0.3 * h0 + 0.8 * h1)).epsilon(1e-14));
  CHECK(y.value()[1] == doctest::Approx(std::tanh(1.1 * h0 + 0.4 * h1 + 0.5)).epsilon(1e-14));
}

TEST_CASE("prenet rejects a mismatched frame dimension") {
  ad::Graph g;
  const AffineParams layers[] = {{g.constant(Tensor({6, 41})), g.constant(Tensor({6}))}};
  CHECK_THROWS_AS(speech_prenet(layers, g.constant(Tensor({1, 40}))), ShapeError);
}

TEST_CASE("glorot init stays within its limit and lstm forget bias is one") {
  std::mt19937_64 rng(12);
  ParameterStore store;
  add_lstm_parameters(store, "l", 10, 6, rng);
  const double limit = std::sqrt(6.0 / (24.0 + 10.0));
  for (double v : store.value("l.w_input").data()) CHECK(std::abs(v) <= limit);
  const auto& b = store.value("l.bias");
  for (std::size_t i = 0; i < 24; ++i) CHECK(b[i] == (i >= 6 && i < 12 ? 1.0 : 0.0));
}
