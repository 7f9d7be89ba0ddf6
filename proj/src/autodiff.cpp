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

#include "s2t/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "s2t/errors.hpp"

namespace s2t::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap as_matrix(const Tensor& t) {
  return ConstMap(t.raw(), static_cast<Eigen::Index>(t.rows()),
                  static_cast<Eigen::Index>(t.cols()));
}

MutMap as_matrix(Tensor& t) {
  return MutMap(t.raw(), static_cast<Eigen::Index>(t.rows()),
                static_cast<Eigen::Index>(t.cols()));
}

[[noreturn]] void shape_fail(Primitive kind, const std::string& what, const Shape& a,
                             const Shape& b) {
  throw ShapeError(std::string(primitive_name(kind)) + ": " + what + " " +
                   shape_to_string(a) + " vs " + shape_to_string(b));
}

[[noreturn]] void shape_fail(Primitive kind, const std::string& what, const Shape& a) {
  throw ShapeError(std::string(primitive_name(kind)) + ": " + what + " " +
                   shape_to_string(a));
}

Shape with_last(const Shape& s, std::size_t last) {
  Shape out = s;
  out.back() = last;
  return out;
}

void add_into(Tensor& dst, const Tensor& src) {
  if (dst.empty()) {
    dst = src;
    return;
  }
  double* d = dst.raw();
  const double* s = src.raw();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

bool is_bias_of(const Shape& bias, const Shape& x) {
  const std::size_t c = x.back();
  if (bias.size() == 1) return bias[0] == c;
  return bias.size() == 2 && bias[0] == 1 && bias[1] == c;
}

void validate(Primitive kind, const std::vector<const Tensor*>& in, const PrimitiveAttrs& attrs) {
  auto need = [&](std::size_t n) {
    if (in.size() != n) {
      throw ShapeError(std::string(primitive_name(kind)) + ": expected " + std::to_string(n) +
                       " inputs, got " + std::to_string(in.size()));
    }
  };
  switch (kind) {
    case Primitive::kMatMul: {
      need(2);
      const auto& a = in[0]->shape();
      const auto& b = in[1]->shape();
      if (a.size() != 2 || b.size() != 2 || a[1] != b[0])
        shape_fail(kind, "inner dimensions differ", a, b);
      break;
    }
    case Primitive::kMatMulNT: {
      need(2);
      const auto& a = in[0]->shape();
      const auto& b = in[1]->shape();
      if (a.size() != 2 || b.size() != 2 || a[1] != b[1])
        shape_fail(kind, "inner dimensions differ", a, b);
      break;
    }
    case Primitive::kAdd: {
      need(2);
      const auto& a = in[0]->shape();
      const auto& b = in[1]->shape();
      if (a != b && !is_bias_of(b, a)) shape_fail(kind, "shapes not addable", a, b);
      break;
    }
    case Primitive::kMul: {
      need(2);
      const auto& a = in[0]->shape();
      const auto& b = in[1]->shape();
      const bool column = b.size() == 2 && b[1] == 1 && a.size() == 2 && b[0] == a[0];
      if (a != b && !column) shape_fail(kind, "shapes not multipliable", a, b);
      break;
    }
    case Primitive::kScale:
    case Primitive::kTanh:
    case Primitive::kSigmoid:
    case Primitive::kLogSoftmax:
    case Primitive::kSum:
    case Primitive::kCustom:
      need(1);
      break;
    case Primitive::kSoftmax:
      need(1);
      if (!attrs.mask.empty() && attrs.mask.shape() != in[0]->shape())
        shape_fail(kind, "mask shape differs", in[0]->shape(), attrs.mask.shape());
      break;
    case Primitive::kDropout:
      need(1);
      if (attrs.mask.shape() != in[0]->shape())
        shape_fail(kind, "mask shape differs", in[0]->shape(), attrs.mask.shape());
      break;
    case Primitive::kConcat: {
      if (in.empty()) throw ShapeError("concat: no inputs");
      const auto& first = in[0]->shape();
      for (const auto* t : in) {
        const auto& s = t->shape();
        if (s.size() != first.size() || !std::equal(s.begin(), s.end() - 1, first.begin()))
          shape_fail(kind, "leading axes differ", first, s);
      }
      break;
    }
    case Primitive::kSlice:
      need(1);
      if (attrs.begin >= attrs.end || attrs.end > in[0]->shape().back())
        shape_fail(kind, "range [" + std::to_string(attrs.begin) + "," +
                             std::to_string(attrs.end) + ") outside",
                   in[0]->shape());
      break;
    case Primitive::kConvSame: {
      need(2);
      const auto& s = in[0]->shape();
      const auto& f = in[1]->shape();
      if (s.size() > 2 || f.size() != 1) shape_fail(kind, "expected signal and 1-d filter", s, f);
      if (f[0] % 2 == 0) shape_fail(kind, "filter length must be odd", f);
      break;
    }
    case Primitive::kEmbedding: {
      need(1);
      const auto& e = in[0]->shape();
      if (e.size() != 2) shape_fail(kind, "table must be rank 2", e);
      if (attrs.ids.empty()) throw ShapeError("embedding: empty id list");
      for (int id : attrs.ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= e[1])
          throw ShapeError("embedding: id " + std::to_string(id) + " out of range for table " +
                           shape_to_string(e));
      }
      break;
    }
    case Primitive::kPick: {
      need(1);
      const auto& x = in[0]->shape();
      if (x.size() != 2 || attrs.ids.size() != x[0])
        shape_fail(kind, "one id per row required", x);
      for (int id : attrs.ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= x[1])
          throw ShapeError("pick: id " + std::to_string(id) + " out of range for " +
                           shape_to_string(x));
      }
      break;
    }
    case Primitive::kReshape:
      need(1);
      if (attrs.shape.empty() || shape_size(attrs.shape) != in[0]->size())
        shape_fail(kind, "element count differs", in[0]->shape(), attrs.shape);
      break;
    case Primitive::kRepeatRows:
      need(1);
      if (in[0]->rank() != 2 || attrs.groups == 0) shape_fail(kind, "expected matrix", in[0]->shape());
      break;
    case Primitive::kSumRowGroups:
      need(1);
      if (in[0]->rank() != 2 || attrs.groups == 0 || in[0]->shape()[0] % attrs.groups != 0)
        shape_fail(kind, "rows not divisible by " + std::to_string(attrs.groups), in[0]->shape());
      break;
    case Primitive::kInterleaveRows: {
      if (in.empty()) throw ShapeError("interleave_rows: no inputs");
      for (const auto* t : in) {
        if (t->rank() != 2 || t->shape() != in[0]->shape())
          shape_fail(kind, "steps must share a matrix shape", in[0]->shape(), t->shape());
      }
      break;
    }
    default:
      throw ShapeError("unknown primitive id " + std::to_string(static_cast<int>(kind)));
  }
}

void softmax_rows(const Tensor& x, const Tensor* mask, Tensor& y) {
  const std::size_t rows = x.rows();
  const std::size_t cols = x.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.raw() + r * cols;
    double* yr = y.raw() + r * cols;
    const double* mr = mask ? mask->raw() + r * cols : nullptr;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c) {
      if (!mr || mr[c] != 0.0) mx = std::max(mx, xr[c]);
    }
    if (!std::isfinite(mx)) {
      throw ShapeError("softmax: row " + std::to_string(r) + " has every position masked");
    }
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double e = (!mr || mr[c] != 0.0) ? std::exp(xr[c] - mx) : 0.0;
      yr[c] = e;
      total += e;
    }
    for (std::size_t c = 0; c < cols; ++c) yr[c] /= total;
  }
}

}  // namespace

const char* primitive_name(Primitive kind) {
  switch (kind) {
    case Primitive::kLeaf: return "leaf";
    case Primitive::kConstant: return "constant";
    case Primitive::kMatMul: return "matmul";
    case Primitive::kMatMulNT: return "matmul_nt";
    case Primitive::kAdd: return "add";
    case Primitive::kMul: return "mul";
    case Primitive::kScale: return "scale";
    case Primitive::kTanh: return "tanh";
    case Primitive::kSigmoid: return "sigmoid";
    case Primitive::kSoftmax: return "softmax";
    case Primitive::kLogSoftmax: return "log_softmax";
    case Primitive::kConcat: return "concat";
    case Primitive::kSlice: return "slice";
    case Primitive::kConvSame: return "conv_same";
    case Primitive::kEmbedding: return "embedding";
    case Primitive::kDropout: return "dropout";
    case Primitive::kSum: return "sum";
    case Primitive::kPick: return "pick";
    case Primitive::kReshape: return "reshape";
    case Primitive::kRepeatRows: return "repeat_rows";
    case Primitive::kSumRowGroups: return "sum_row_groups";
    case Primitive::kInterleaveRows: return "interleave_rows";
    case Primitive::kCustom: return "custom";
    case Primitive::kCount: break;
  }
  return "unknown";
}

const Tensor& Var::value() const { return graph->value(id); }

const Tensor& Graph::value(int id) const { return nodes_.at(static_cast<std::size_t>(id)).value(); }

Var Graph::parameter(const std::string& name, const Tensor& value) {
  if (auto it = params_.find(name); it != params_.end()) return Var{this, it->second};
  Node node;
  node.kind = Primitive::kLeaf;
  node.external = &value;
  node.requires_grad = true;
  node.name = name;
  nodes_.push_back(std::move(node));
  const int id = static_cast<int>(nodes_.size()) - 1;
  params_.emplace(name, id);
  return Var{this, id};
}

Var Graph::constant(Tensor value) {
  Node node;
  node.kind = Primitive::kConstant;
  node.owned = std::move(value);
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::apply(Primitive kind, std::span<const Var> inputs, PrimitiveAttrs attrs) {
  if (static_cast<int>(kind) <= static_cast<int>(Primitive::kConstant) ||
      static_cast<int>(kind) >= static_cast<int>(Primitive::kCount) || kind == Primitive::kCustom) {
    throw ShapeError("unknown primitive id " + std::to_string(static_cast<int>(kind)));
  }
  Node node;
  node.kind = kind;
  std::vector<const Tensor*> values;
  values.reserve(inputs.size());
  for (const Var& v : inputs) {
    if (v.graph != this) throw ShapeError(std::string(primitive_name(kind)) + ": input from another graph");
    node.inputs.push_back(v.id);
    values.push_back(&value(v.id));
    node.requires_grad = node.requires_grad || nodes_[static_cast<std::size_t>(v.id)].requires_grad;
  }
  validate(kind, values, attrs);
  node.attrs = std::move(attrs);
  node.owned = compute(node);
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::custom(Var x, CustomForward forward, CustomBackward backward) {
  Node node;
  node.kind = Primitive::kCustom;
  node.inputs = {x.id};
  node.requires_grad = nodes_.at(static_cast<std::size_t>(x.id)).requires_grad;
  customs_.emplace_back(std::move(forward), std::move(backward));
  node.custom_index = static_cast<int>(customs_.size()) - 1;
  node.owned = compute(node);
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Tensor Graph::compute(const Node& node) const {
  auto in = [&](std::size_t i) -> const Tensor& { return value(node.inputs[i]); };
  const auto& attrs = node.attrs;
  switch (node.kind) {
    case Primitive::kMatMul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      Tensor y({a.shape()[0], b.shape()[1]});
      as_matrix(y).noalias() = as_matrix(a) * as_matrix(b);
      return y;
    }
    case Primitive::kMatMulNT: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      Tensor y({a.shape()[0], b.shape()[0]});
      as_matrix(y).noalias() = as_matrix(a) * as_matrix(b).transpose();
      return y;
    }
    case Primitive::kAdd: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      Tensor y = a;
      if (a.shape() == b.shape()) {
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += b[i];
      } else {
        const std::size_t c = a.cols();
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += b[i % c];
      }
      return y;
    }
    case Primitive::kMul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      Tensor y = a;
      if (a.shape() == b.shape()) {
        for (std::size_t i = 0; i < y.size(); ++i) y[i] *= b[i];
      } else {
        const std::size_t c = a.cols();
        for (std::size_t i = 0; i < y.size(); ++i) y[i] *= b[i / c];
      }
      return y;
    }
    case Primitive::kScale: {
      Tensor y = in(0);
      for (auto& v : y.data()) v *= attrs.scale;
      return y;
    }
    case Primitive::kTanh: {
      Tensor y = in(0);
      for (auto& v : y.data()) v = std::tanh(v);
      return y;
    }
    case Primitive::kSigmoid: {
      Tensor y = in(0);
      for (auto& v : y.data()) v = stable_sigmoid(v);
      return y;
    }
    case Primitive::kSoftmax: {
      Tensor y(in(0).shape());
      softmax_rows(in(0), attrs.mask.empty() ? nullptr : &attrs.mask, y);
      return y;
    }
    case Primitive::kLogSoftmax: {
      const Tensor& x = in(0);
      Tensor y(x.shape());
      const std::size_t cols = x.cols();
      for (std::size_t r = 0; r < x.rows(); ++r) {
        const double* xr = x.raw() + r * cols;
        double* yr = y.raw() + r * cols;
        const double mx = *std::max_element(xr, xr + cols);
        double total = 0.0;
        for (std::size_t c = 0; c < cols; ++c) total += std::exp(xr[c] - mx);
        const double lse = mx + std::log(total);
        for (std::size_t c = 0; c < cols; ++c) yr[c] = xr[c] - lse;
      }
      return y;
    }
    case Primitive::kConcat: {
      std::size_t total = 0;
      for (std::size_t i = 0; i < node.inputs.size(); ++i) total += in(i).cols();
      Tensor y(with_last(in(0).shape(), total));
      const std::size_t rows = in(0).rows();
      std::size_t offset = 0;
      for (std::size_t i = 0; i < node.inputs.size(); ++i) {
        const Tensor& part = in(i);
        const std::size_t c = part.cols();
        for (std::size_t r = 0; r < rows; ++r) {
          std::copy_n(part.raw() + r * c, c, y.raw() + r * total + offset);
        }
        offset += c;
      }
      return y;
    }
    case Primitive::kSlice: {
      const Tensor& x = in(0);
      const std::size_t width = attrs.end - attrs.begin;
      Tensor y(with_last(x.shape(), width));
      const std::size_t cols = x.cols();
      for (std::size_t r = 0; r < x.rows(); ++r) {
        std::copy_n(x.raw() + r * cols + attrs.begin, width, y.raw() + r * width);
      }
      return y;
    }
    case Primitive::kConvSame: {
      const Tensor& signal = in(0);
      const Tensor& filter = in(1);
      Tensor y(signal.shape());
      const auto len = static_cast<long>(signal.cols());
      const auto k = static_cast<long>(filter.size());
      const long center = (k - 1) / 2;
      for (std::size_t r = 0; r < signal.rows(); ++r) {
        const double* s = signal.raw() + r * signal.cols();
        double* out = y.raw() + r * signal.cols();
        for (long i = 0; i < len; ++i) {
          double acc = 0.0;
          for (long j = 0; j < k; ++j) {
            const long p = i + center - j;
            if (p >= 0 && p < len) acc += filter[static_cast<std::size_t>(j)] * s[p];
          }
          out[i] = acc;
        }
      }
      return y;
    }
    case Primitive::kEmbedding: {
      const Tensor& table = in(0);
      const std::size_t n = table.shape()[0];
      const std::size_t vocab = table.shape()[1];
      Tensor y({attrs.ids.size(), n});
      for (std::size_t b = 0; b < attrs.ids.size(); ++b) {
        const auto id = static_cast<std::size_t>(attrs.ids[b]);
        for (std::size_t j = 0; j < n; ++j) y.at(b, j) = table[j * vocab + id];
      }
      return y;
    }
    case Primitive::kDropout: {
      Tensor y = in(0);
      for (std::size_t i = 0; i < y.size(); ++i) y[i] *= attrs.mask[i];
      return y;
    }
    case Primitive::kSum: {
      double acc = 0.0;
      for (double v : in(0).data()) acc += v;
      return Tensor::scalar(acc);
    }
    case Primitive::kPick: {
      const Tensor& x = in(0);
      Tensor y({x.shape()[0], 1});
      for (std::size_t r = 0; r < x.shape()[0]; ++r)
        y[r] = x.at(r, static_cast<std::size_t>(attrs.ids[r]));
      return y;
    }
    case Primitive::kReshape:
      return in(0).reshaped(attrs.shape);
    case Primitive::kRepeatRows: {
      const Tensor& x = in(0);
      const std::size_t rows = x.shape()[0];
      const std::size_t cols = x.shape()[1];
      Tensor y({rows * attrs.groups, cols});
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t g = 0; g < attrs.groups; ++g) {
          std::copy_n(x.raw() + r * cols, cols, y.raw() + (r * attrs.groups + g) * cols);
        }
      }
      return y;
    }
    case Primitive::kSumRowGroups: {
      const Tensor& x = in(0);
      const std::size_t rows = x.shape()[0] / attrs.groups;
      const std::size_t cols = x.shape()[1];
      Tensor y({rows, cols});
      for (std::size_t r = 0; r < rows; ++r) {
        double* out = y.raw() + r * cols;
        for (std::size_t g = 0; g < attrs.groups; ++g) {
          const double* src = x.raw() + (r * attrs.groups + g) * cols;
          for (std::size_t c = 0; c < cols; ++c) out[c] += src[c];
        }
      }
      return y;
    }
    case Primitive::kInterleaveRows: {
      const std::size_t steps = node.inputs.size();
      const std::size_t rows = in(0).shape()[0];
      const std::size_t cols = in(0).shape()[1];
      Tensor y({rows * steps, cols});
      for (std::size_t i = 0; i < steps; ++i) {
        const Tensor& x = in(i);
        for (std::size_t r = 0; r < rows; ++r) {
          std::copy_n(x.raw() + r * cols, cols, y.raw() + (r * steps + i) * cols);
        }
      }
      return y;
    }
    case Primitive::kCustom:
      return customs_[static_cast<std::size_t>(node.custom_index)].first(in(0));
    case Primitive::kLeaf:
    case Primitive::kConstant:
    case Primitive::kCount:
      break;
  }
  throw ShapeError("unknown primitive id " + std::to_string(static_cast<int>(node.kind)));
}

void Graph::accumulate_backward(const Node& node, const Tensor& g,
                                std::vector<Tensor>& grads) const {
  auto in = [&](std::size_t i) -> const Tensor& { return value(node.inputs[i]); };
  auto wants = [&](std::size_t i) {
    return nodes_[static_cast<std::size_t>(node.inputs[i])].requires_grad;
  };
  auto slot = [&](std::size_t i) -> Tensor& {
    return grads[static_cast<std::size_t>(node.inputs[i])];
  };
  const Tensor& y = node.value();
  const auto& attrs = node.attrs;

  switch (node.kind) {
    case Primitive::kMatMul: {
      if (wants(0)) {
        Tensor ga(in(0).shape());
        as_matrix(ga).noalias() = as_matrix(g) * as_matrix(in(1)).transpose();
        add_into(slot(0), ga);
      }
      if (wants(1)) {
        Tensor gb(in(1).shape());
        as_matrix(gb).noalias() = as_matrix(in(0)).transpose() * as_matrix(g);
        add_into(slot(1), gb);
      }
      return;
    }
    case Primitive::kMatMulNT: {
      if (wants(0)) {
        Tensor ga(in(0).shape());
        as_matrix(ga).noalias() = as_matrix(g) * as_matrix(in(1));
        add_into(slot(0), ga);
      }
      if (wants(1)) {
        Tensor gb(in(1).shape());
        as_matrix(gb).noalias() = as_matrix(g).transpose() * as_matrix(in(0));
        add_into(slot(1), gb);
      }
      return;
    }
    case Primitive::kAdd: {
      if (wants(0)) add_into(slot(0), g);
      if (wants(1)) {
        if (in(0).shape() == in(1).shape()) {
          add_into(slot(1), g);
        } else {
          Tensor gb(in(1).shape());
          const std::size_t c = g.cols();
          for (std::size_t i = 0; i < g.size(); ++i) gb[i % c] += g[i];
          add_into(slot(1), gb);
        }
      }
      return;
    }
    case Primitive::kMul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      const bool same = a.shape() == b.shape();
      const std::size_t c = a.cols();
      if (wants(0)) {
        Tensor ga = g;
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= same ? b[i] : b[i / c];
        add_into(slot(0), ga);
      }
      if (wants(1)) {
        Tensor gb(b.shape());
        for (std::size_t i = 0; i < g.size(); ++i) gb[same ? i : i / c] += g[i] * a[i];
        add_into(slot(1), gb);
      }
      return;
    }
    case Primitive::kScale: {
      if (!wants(0)) return;
      Tensor ga = g;
      for (auto& v : ga.data()) v *= attrs.scale;
      add_into(slot(0), ga);
      return;
    }
    case Primitive::kTanh: {
      if (!wants(0)) return;
      Tensor ga = g;
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= 1.0 - y[i] * y[i];
      add_into(slot(0), ga);
      return;
    }
    case Primitive::kSigmoid: {
      if (!wants(0)) return;
      Tensor ga = g;
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= y[i] * (1.0 - y[i]);
      add_into(slot(0), ga);
      return;
    }
    case Primitive::kSoftmax: {
      if (!wants(0)) return;
      Tensor ga(y.shape());
      const std::size_t cols = y.cols();
      for (std::size_t r = 0; r < y.rows(); ++r) {
        const double* yr = y.raw() + r * cols;
        const double* gr = g.raw() + r * cols;
        double dot = 0.0;
        for (std::size_t c = 0; c < cols; ++c) dot += yr[c] * gr[c];
        double* out = ga.raw() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) out[c] = yr[c] * (gr[c] - dot);
      }
      add_into(slot(0), ga);
      return;
    }
    case Primitive::kLogSoftmax: {
      if (!wants(0)) return;
      Tensor ga(y.shape());
      const std::size_t cols = y.cols();
      for (std::size_t r = 0; r < y.rows(); ++r) {
        const double* yr = y.raw() + r * cols;
        const double* gr = g.raw() + r * cols;
        double total = 0.0;
        for (std::size_t c = 0; c < cols; ++c) total += gr[c];
        double* out = ga.raw() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) out[c] = gr[c] - std::exp(yr[c]) * total;
      }
      add_into(slot(0), ga);
      return;
    }
    case Primitive::kConcat: {
      const std::size_t total = y.cols();
      const std::size_t rows = y.rows();
      std::size_t offset = 0;
      for (std::size_t i = 0; i < node.inputs.size(); ++i) {
        const std::size_t c = in(i).cols();
        if (wants(i)) {
          Tensor gi(in(i).shape());
          for (std::size_t r = 0; r < rows; ++r)
            std::copy_n(g.raw() + r * total + offset, c, gi.raw() + r * c);
          add_into(slot(i), gi);
        }
        offset += c;
      }
      return;
    }
    case Primitive::kSlice: {
      if (!wants(0)) return;
      const Tensor& x = in(0);
      Tensor gx(x.shape());
      const std::size_t width = attrs.end - attrs.begin;
      for (std::size_t r = 0; r < x.rows(); ++r)
        std::copy_n(g.raw() + r * width, width, gx.raw() + r * x.cols() + attrs.begin);
      add_into(slot(0), gx);
      return;
    }
    case Primitive::kConvSame: {
      const Tensor& signal = in(0);
      const Tensor& filter = in(1);
      const auto len = static_cast<long>(signal.cols());
      const auto k = static_cast<long>(filter.size());
      const long center = (k - 1) / 2;
      Tensor gs(signal.shape());
      Tensor gf(filter.shape());
      for (std::size_t r = 0; r < signal.rows(); ++r) {
        const double* s = signal.raw() + r * signal.cols();
        const double* gr = g.raw() + r * signal.cols();
        double* gsr = gs.raw() + r * signal.cols();
        for (long i = 0; i < len; ++i) {
          for (long j = 0; j < k; ++j) {
            const long p = i + center - j;
            if (p < 0 || p >= len) continue;
            gsr[p] += filter[static_cast<std::size_t>(j)] * gr[i];
            gf[static_cast<std::size_t>(j)] += s[p] * gr[i];
          }
        }
      }
      if (wants(0)) add_into(slot(0), gs);
      if (wants(1)) add_into(slot(1), gf);
      return;
    }
    case Primitive::kEmbedding: {
      if (!wants(0)) return;
      const Tensor& table = in(0);
      const std::size_t n = table.shape()[0];
      const std::size_t vocab = table.shape()[1];
      Tensor& gt = slot(0);
      if (gt.empty()) gt = Tensor(table.shape());
      for (std::size_t b = 0; b < attrs.ids.size(); ++b) {
        const auto id = static_cast<std::size_t>(attrs.ids[b]);
        for (std::size_t j = 0; j < n; ++j) gt[j * vocab + id] += g.at(b, j);
      }
      return;
    }
    case Primitive::kDropout: {
      if (!wants(0)) return;
      Tensor ga = g;
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= attrs.mask[i];
      add_into(slot(0), ga);
      return;
    }
    case Primitive::kSum: {
      if (!wants(0)) return;
      add_into(slot(0), Tensor(in(0).shape(), g[0]));
      return;
    }
    case Primitive::kPick: {
      if (!wants(0)) return;
      Tensor& gx = slot(0);
      if (gx.empty()) gx = Tensor(in(0).shape());
      for (std::size_t r = 0; r < attrs.ids.size(); ++r)
        gx.at(r, static_cast<std::size_t>(attrs.ids[r])) += g[r];
      return;
    }
    case Primitive::kReshape:
      if (wants(0)) add_into(slot(0), g.reshaped(in(0).shape()));
      return;
    case Primitive::kRepeatRows: {
      if (!wants(0)) return;
      const std::size_t rows = in(0).shape()[0];
      const std::size_t cols = in(0).shape()[1];
      Tensor gx(in(0).shape());
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t k = 0; k < attrs.groups; ++k) {
          const double* src = g.raw() + (r * attrs.groups + k) * cols;
          for (std::size_t c = 0; c < cols; ++c) gx.raw()[r * cols + c] += src[c];
        }
      }
      add_into(slot(0), gx);
      return;
    }
    case Primitive::kSumRowGroups: {
      if (!wants(0)) return;
      const std::size_t rows = y.shape()[0];
      const std::size_t cols = y.shape()[1];
      Tensor gx(in(0).shape());
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t k = 0; k < attrs.groups; ++k)
          std::copy_n(g.raw() + r * cols, cols, gx.raw() + (r * attrs.groups + k) * cols);
      }
      add_into(slot(0), gx);
      return;
    }
    case Primitive::kInterleaveRows: {
      const std::size_t steps = node.inputs.size();
      const std::size_t rows = in(0).shape()[0];
      const std::size_t cols = in(0).shape()[1];
      for (std::size_t i = 0; i < steps; ++i) {
        if (!wants(i)) continue;
        Tensor gi(in(i).shape());
        for (std::size_t r = 0; r < rows; ++r)
          std::copy_n(g.raw() + (r * steps + i) * cols, cols, gi.raw() + r * cols);
        add_into(slot(i), gi);
      }
      return;
    }
    case Primitive::kCustom: {
      if (!wants(0)) return;
      add_into(slot(0), customs_[static_cast<std::size_t>(node.custom_index)].second(in(0), y, g));
      return;
    }
    case Primitive::kLeaf:
    case Primitive::kConstant:
    case Primitive::kCount:
      return;
  }
}

std::vector<Tensor> Graph::gradients(Var loss) const {
  if (loss.graph != this || loss.id < 0 || static_cast<std::size_t>(loss.id) >= nodes_.size()) {
    throw ShapeError("backprop: loss node is not on this tape");
  }
  const Tensor& out = value(loss.id);
  if (out.size() != 1) {
    throw ShapeError("backprop: loss must be scalar, got " + shape_to_string(out.shape()));
  }
  std::vector<Tensor> grads(nodes_.size());
  grads[static_cast<std::size_t>(loss.id)] = Tensor(out.shape(), 1.0);
  for (int id = loss.id; id >= 0; --id) {
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    const Tensor& g = grads[static_cast<std::size_t>(id)];
    if (g.empty() || !node.requires_grad) continue;
    accumulate_backward(node, g, grads);
  }
  return grads;
}

std::map<std::string, Tensor> Graph::backprop(Var loss) const {
  auto grads = gradients(loss);
  std::map<std::string, Tensor> out;
  for (const auto& [name, id] : params_) {
    Tensor& g = grads[static_cast<std::size_t>(id)];
    out.emplace(name, g.empty() ? Tensor(value(id).shape()) : std::move(g));
  }
  return out;
}

bool Graph::replay_matches() const {
  for (const Node& node : nodes_) {
    if (node.kind == Primitive::kLeaf || node.kind == Primitive::kConstant) continue;
    if (!(compute(node) == node.value())) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

namespace {

Var unary(Primitive kind, Var x, PrimitiveAttrs attrs = {}) {
  const Var in[] = {x};
  return x.graph->apply(kind, in, std::move(attrs));
}

Var binary(Primitive kind, Var a, Var b) {
  if (a.graph != b.graph) throw ShapeError(std::string(primitive_name(kind)) + ": inputs on different graphs");
  const Var in[] = {a, b};
  return a.graph->apply(kind, in);
}

}  // namespace

Var matmul(Var a, Var b) { return binary(Primitive::kMatMul, a, b); }
Var matmul_nt(Var a, Var b) { return binary(Primitive::kMatMulNT, a, b); }
Var add(Var a, Var b) { return binary(Primitive::kAdd, a, b); }
Var mul(Var a, Var b) { return binary(Primitive::kMul, a, b); }

Var scale(Var x, double factor) {
  PrimitiveAttrs attrs;
  attrs.scale = factor;
  return unary(Primitive::kScale, x, std::move(attrs));
}

Var tanh(Var x) { return unary(Primitive::kTanh, x); }
Var sigmoid(Var x) { return unary(Primitive::kSigmoid, x); }
Var softmax(Var x) { return unary(Primitive::kSoftmax, x); }

Var masked_softmax(Var x, const Tensor& mask) {
  PrimitiveAttrs attrs;
  attrs.mask = mask;
  return unary(Primitive::kSoftmax, x, std::move(attrs));
}

Var log_softmax(Var x) { return unary(Primitive::kLogSoftmax, x); }

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  return parts[0].graph->apply(Primitive::kConcat, parts);
}

Var slice(Var x, std::size_t begin, std::size_t end) {
  PrimitiveAttrs attrs;
  attrs.begin = begin;
  attrs.end = end;
  return unary(Primitive::kSlice, x, std::move(attrs));
}

Var conv_same(Var signal, Var filter) { return binary(Primitive::kConvSame, signal, filter); }

Var embedding(Var table, std::vector<int> ids) {
  PrimitiveAttrs attrs;
  attrs.ids = std::move(ids);
  return unary(Primitive::kEmbedding, table, std::move(attrs));
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Var dropout(Var x, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) throw ShapeError("dropout: rate must be below 1");
  Tensor mask(x.shape());
  const double keep = 1.0 / (1.0 - rate);
  for (auto& m : mask.data()) m = uniform01(rng) < rate ? 0.0 : keep;
  return dropout_with_mask(x, std::move(mask));
}

Var dropout_with_mask(Var x, Tensor mask) {
  PrimitiveAttrs attrs;
  attrs.mask = std::move(mask);
  return unary(Primitive::kDropout, x, std::move(attrs));
}

Var sum(Var x) { return unary(Primitive::kSum, x); }

Var pick(Var x, std::vector<int> ids) {
  PrimitiveAttrs attrs;
  attrs.ids = std::move(ids);
  return unary(Primitive::kPick, x, std::move(attrs));
}

Var reshape(Var x, Shape shape) {
  PrimitiveAttrs attrs;
  attrs.shape = std::move(shape);
  return unary(Primitive::kReshape, x, std::move(attrs));
}

Var repeat_rows(Var x, std::size_t times) {
  PrimitiveAttrs attrs;
  attrs.groups = times;
  return unary(Primitive::kRepeatRows, x, std::move(attrs));
}

Var sum_row_groups(Var x, std::size_t group) {
  PrimitiveAttrs attrs;
  attrs.groups = group;
  return unary(Primitive::kSumRowGroups, x, std::move(attrs));
}

Var interleave_rows(std::span<const Var> steps) {
  if (steps.empty()) throw ShapeError("interleave_rows: no inputs");
  return steps[0].graph->apply(Primitive::kInterleaveRows, steps);
}

}  // namespace s2t::ad
