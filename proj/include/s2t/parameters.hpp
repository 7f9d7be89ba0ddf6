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
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "s2t/autodiff.hpp"
#include "s2t/tensor.hpp"

namespace s2t {

struct ParameterEntry {
  Tensor value;
  Tensor first_moment;
  Tensor second_moment;
};

/// Named trainable tensors with their Adam moments and the update counter.
class ParameterStore {
 public:
  /// Adds a parameter with zero moments. Duplicate names are rejected.
  void add(const std::string& name, Tensor value);
  /// Restores a full entry (checkpoint loading).
  void restore(const std::string& name, ParameterEntry entry);

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  const Tensor& value(const std::string& name) const;
  Tensor& mutable_value(const std::string& name);
  const ParameterEntry& entry(const std::string& name) const;
  ParameterEntry& mutable_entry(const std::string& name);

  const std::map<std::string, ParameterEntry>& entries() const { return entries_; }
  std::vector<std::string> names() const;
  std::size_t parameter_count() const;

  std::uint64_t step() const { return step_; }
  void set_step(std::uint64_t step) { step_ = step; }
  void advance_step() { ++step_; }

  /// Binds parameter `name` as a trainable leaf of `graph`.
  ad::Var bind(ad::Graph& graph, const std::string& name) const {
    return graph.parameter(name, value(name));
  }

 private:
  std::map<std::string, ParameterEntry> entries_;
  std::uint64_t step_ = 0;
};

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One Adam step with bias correction at the incremented step counter.
/// Parameters absent from `grads` keep their values and moments.
void adam_update(ParameterStore& store, const std::map<std::string, Tensor>& grads,
                 double learning_rate, const AdamSettings& settings = {});

using ScalarFunction =
    std::function<ad::Var(ad::Graph&, const std::map<std::string, ad::Var>&)>;

/// Largest |analytic - central| / max(1e-8, |analytic| + |central|) over
/// every coordinate of every tensor in `point`. Throws DivergenceError when
/// a probe evaluates to a non-finite value.
double gradient_check(const ScalarFunction& f, const std::map<std::string, Tensor>& point,
                      double epsilon);

}  // namespace s2t
