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

#include "s2t/parameters.hpp"

#include <algorithm>
#include <cmath>

#include "s2t/errors.hpp"

namespace s2t {

void ParameterStore::add(const std::string& name, Tensor value) {
  if (entries_.count(name)) throw ShapeError("duplicate parameter " + name);
  ParameterEntry entry;
  entry.first_moment = Tensor(value.shape());
  entry.second_moment = Tensor(value.shape());
  entry.value = std::move(value);
  entries_.emplace(name, std::move(entry));
}

void ParameterStore::restore(const std::string& name, ParameterEntry entry) {
  if (entry.first_moment.shape() != entry.value.shape() ||
      entry.second_moment.shape() != entry.value.shape()) {
    throw ShapeError("moment shapes differ from parameter " + name);
  }
  entries_[name] = std::move(entry);
}

const ParameterEntry& ParameterStore::entry(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ShapeError("unknown parameter " + name);
  return it->second;
}

const Tensor& ParameterStore::value(const std::string& name) const { return entry(name).value; }

ParameterEntry& ParameterStore::mutable_entry(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ShapeError("unknown parameter " + name);
  return it->second;
}

Tensor& ParameterStore::mutable_value(const std::string& name) { return mutable_entry(name).value; }

std::vector<std::string> ParameterStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, _] : entries_) out.push_back(name);
  return out;
}

std::size_t ParameterStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [_, e] : entries_) n += e.value.size();
  return n;
}

void adam_update(ParameterStore& store, const std::map<std::string, Tensor>& grads,
                 double learning_rate, const AdamSettings& settings) {
  for (const auto& [name, grad] : grads) {
    const Tensor& current = store.value(name);
    if (grad.shape() != current.shape()) {
      throw ShapeError("adam_update: gradient " + shape_to_string(grad.shape()) +
                       " does not match parameter " + name + " " +
                       shape_to_string(current.shape()));
    }
  }
  store.advance_step();
  const auto t = static_cast<double>(store.step());
  const double correction1 = 1.0 - std::pow(settings.beta1, t);
  const double correction2 = 1.0 - std::pow(settings.beta2, t);

  for (const auto& [name, grad] : grads) {
    ParameterEntry& entry = store.mutable_entry(name);
    for (std::size_t i = 0; i < grad.size(); ++i) {
      const double g = grad[i];
      entry.first_moment[i] = settings.beta1 * entry.first_moment[i] + (1.0 - settings.beta1) * g;
      entry.second_moment[i] =
          settings.beta2 * entry.second_moment[i] + (1.0 - settings.beta2) * g * g;
      const double m_hat = entry.first_moment[i] / correction1;
      const double v_hat = entry.second_moment[i] / correction2;
      entry.value[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + settings.epsilon);
    }
  }
}

namespace {

double evaluate(const ScalarFunction& f, const std::map<std::string, Tensor>& point) {
  ad::Graph graph;
  std::map<std::string, ad::Var> vars;
  for (const auto& [name, value] : point) vars.emplace(name, graph.parameter(name, value));
  const ad::Var out = f(graph, vars);
  if (out.value().size() != 1) throw ShapeError("gradient_check: function must be scalar");
  const double v = out.value()[0];
  if (!std::isfinite(v)) throw DivergenceError("gradient_check: non-finite function value");
  return v;
}

}  // namespace

double gradient_check(const ScalarFunction& f, const std::map<std::string, Tensor>& point,
                      double epsilon) {
  if (!(epsilon > 0.0)) throw ShapeError("gradient_check: epsilon must be positive");

  std::map<std::string, Tensor> analytic;
  {
    ad::Graph graph;
    std::map<std::string, ad::Var> vars;
    for (const auto& [name, value] : point) vars.emplace(name, graph.parameter(name, value));
    const ad::Var out = f(graph, vars);
    if (!out.value().all_finite()) throw DivergenceError("gradient_check: non-finite function value");
    analytic = graph.backprop(out);
  }

  std::map<std::string, Tensor> probe = point;
  double worst = 0.0;
  for (auto& [name, tensor] : probe) {
    const Tensor& grad = analytic.at(name);
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      const double saved = tensor[i];
      tensor[i] = saved + epsilon;
      const double up = evaluate(f, probe);
      tensor[i] = saved - epsilon;
      const double down = evaluate(f, probe);
      tensor[i] = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double denom = std::max(1e-8, std::abs(grad[i]) + std::abs(numeric));
      worst = std::max(worst, std::abs(grad[i] - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace s2t
