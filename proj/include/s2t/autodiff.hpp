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

// Reverse-mode differentiation over a recorded tape of tensor primitives.
//
// A Graph owns the tape. Every primitive application appends one node whose
// inputs were appended earlier, so the node list is already in topological
// order and backprop is a single reverse sweep.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "s2t/tensor.hpp"

namespace s2t::ad {

enum class Primitive : int {
  kLeaf = 0,
  kConstant,
  kMatMul,         // [R,K] x [K,C]
  kMatMulNT,       // [R,K] x [C,K]^T
  kAdd,            // equal shapes, or [R,C] + bias of C entries
  kMul,            // equal shapes, or [R,C] * column [R,1]
  kScale,          // x * attrs.scale
  kTanh,
  kSigmoid,
  kSoftmax,        // last axis, optional mask in attrs.mask
  kLogSoftmax,     // last axis
  kConcat,         // last axis
  kSlice,          // last axis, [attrs.begin, attrs.end)
  kConvSame,       // signal [R,A] convolved with odd-length filter, zero padded
  kEmbedding,      // columns of an [n,V] table selected by attrs.ids
  kDropout,        // x * attrs.mask
  kSum,            // all entries to a scalar
  kPick,           // y[r] = x[r, attrs.ids[r]], shape [R,1]
  kReshape,
  kRepeatRows,     // each row repeated attrs.groups times
  kSumRowGroups,   // sums consecutive blocks of attrs.groups rows
  kInterleaveRows, // A inputs of [B,C] to [B*A,C], row b*A+i from input i
  kCustom,
  kCount
};

const char* primitive_name(Primitive kind);

struct PrimitiveAttrs {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t groups = 0;
  double scale = 1.0;
  Shape shape;
  std::vector<int> ids;
  Tensor mask;
};

class Graph;

/// Handle to a node on a Graph.
struct Var {
  Graph* graph = nullptr;
  int id = -1;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool valid() const { return graph != nullptr && id >= 0; }
};

using CustomForward = std::function<Tensor(const Tensor& x)>;
using CustomBackward =
    std::function<Tensor(const Tensor& x, const Tensor& y, const Tensor& grad_y)>;

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Trainable leaf bound to external storage, which must outlive the graph.
  /// Binding the same name twice returns the existing node.
  Var parameter(const std::string& name, const Tensor& value);
  /// Non-trainable leaf holding its own copy.
  Var constant(Tensor value);

  Var apply(Primitive kind, std::span<const Var> inputs, PrimitiveAttrs attrs = {});
  Var custom(Var x, CustomForward forward, CustomBackward backward);

  const Tensor& value(int id) const;
  std::size_t size() const { return nodes_.size(); }
  Primitive kind(int id) const { return nodes_.at(id).kind; }
  const std::vector<int>& inputs(int id) const { return nodes_.at(id).inputs; }

  /// Gradient of a scalar node with respect to every node (empty where
  /// the loss does not depend on the node).
  std::vector<Tensor> gradients(Var loss) const;

  /// Gradient with respect to every parameter; unreachable ones get zeros.
  std::map<std::string, Tensor> backprop(Var loss) const;

  /// Recomputes every non-leaf node from the leaves and returns true when
  /// all recomputed values equal the recorded ones bit for bit.
  bool replay_matches() const;

 private:
  struct Node {
    Primitive kind = Primitive::kLeaf;
    std::vector<int> inputs;
    PrimitiveAttrs attrs;
    Tensor owned;
    const Tensor* external = nullptr;
    bool requires_grad = false;
    std::string name;
    int custom_index = -1;

    const Tensor& value() const { return external ? *external : owned; }
  };

  Tensor compute(const Node& node) const;
  void accumulate_backward(const Node& node, const Tensor& grad_out,
                           std::vector<Tensor>& grads) const;

  std::vector<Node> nodes_;
  std::unordered_map<std::string, int> params_;
  std::vector<std::pair<CustomForward, CustomBackward>> customs_;
};

// Primitive wrappers. All inputs must belong to the same graph.
Var matmul(Var a, Var b);
Var matmul_nt(Var a, Var b);
Var add(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var x, double factor);
Var tanh(Var x);
Var sigmoid(Var x);
Var softmax(Var x);
/// Softmax where entries with mask 0 get probability exactly 0.
Var masked_softmax(Var x, const Tensor& mask);
Var log_softmax(Var x);
Var concat(std::span<const Var> parts);
Var slice(Var x, std::size_t begin, std::size_t end);
Var conv_same(Var signal, Var filter);
Var embedding(Var table, std::vector<int> ids);
/// Inverted dropout: kept units are scaled by 1/(1-rate).
Var dropout(Var x, double rate, std::mt19937_64& rng);
Var dropout_with_mask(Var x, Tensor mask);
Var sum(Var x);
Var pick(Var x, std::vector<int> ids);
Var reshape(Var x, Shape shape);
Var repeat_rows(Var x, std::size_t times);
Var sum_row_groups(Var x, std::size_t group);
Var interleave_rows(std::span<const Var> steps);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

/// Uniform double in [0,1) from 53 high bits; identical on every platform.
double uniform01(std::mt19937_64& rng);

}  // namespace s2t::ad
