// Copyright 2026 The modeflow Authors
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

#include "modeflow/tensorcore/graph.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <string>

#include "modeflow/tensorcore/error.hpp"

namespace modeflow {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap as_matrix(const Tensor& t) {
  return ConstMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                  static_cast<Eigen::Index>(t.cols()));
}
MutMap as_matrix(Tensor& t) {
  return MutMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                static_cast<Eigen::Index>(t.cols()));
}

// How the second operand of a binary elementwise op is broadcast.
enum Broadcast : std::size_t { kFull = 0, kRow = 1, kScalar = 2, kCol = 3 };

std::atomic<int> g_fault{-1};

double fault_factor(OpKind kind) {
  return g_fault.load(std::memory_order_relaxed) == static_cast<int>(kind) ? 1.01 : 1.0;
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }
double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
  const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
  return cdf + x * pdf;
}

double sinusoid_frequency(std::size_t i, std::size_t dim, double base) {
  return std::pow(base, -2.0 * static_cast<double>(i) / static_cast<double>(dim));
}

}  // namespace

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kGelu: return "gelu";
    case OpKind::kLayerNorm: return "layer_norm";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kLogSoftmax: return "log_softmax";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kConcat: return "concat";
    case OpKind::kSlice: return "slice";
    case OpKind::kGatherRows: return "gather_rows";
    case OpKind::kGatherCols: return "gather_cols";
    case OpKind::kSegmentMax: return "segment_max";
    case OpKind::kSinusoidal: return "sinusoidal";
    case OpKind::kStopGradient: return "stop_gradient";
  }
  return "unknown";
}

namespace testing {
void inject_backward_fault(std::optional<OpKind> kind) {
  g_fault.store(kind ? static_cast<int>(*kind) : -1);
}
std::optional<OpKind> injected_backward_fault() {
  const int v = g_fault.load();
  if (v < 0) return std::nullopt;
  return static_cast<OpKind>(v);
}
}  // namespace testing

// ---------------------------------------------------------------------------
// Recording

const Graph::Node& Graph::node(Var v) const {
  if (!v.valid() || v.id >= nodes_.size()) throw ShapeError("invalid graph handle");
  return nodes_[v.id];
}

Var Graph::push(Node n) {
  n.requires_grad = n.kind == OpKind::kLeaf ? n.requires_grad : false;
  if (n.kind != OpKind::kLeaf && n.kind != OpKind::kStopGradient) {
    for (auto p : n.parents) n.requires_grad = n.requires_grad || nodes_[p].requires_grad;
  }
  if (n.kind != OpKind::kLeaf) evaluate(n);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::leaf(Tensor value, bool requires_grad) {
  if (!value.all_finite()) throw NonFiniteError("leaf value contains NaN or Inf");
  Node n;
  n.kind = OpKind::kLeaf;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

namespace {
std::size_t classify_broadcast(const Tensor& a, const Tensor& b, bool allow_col,
                               std::string_view op) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return kFull;
  if (b.size() == 1) return kScalar;
  if (b.rows() == 1 && b.cols() == a.cols()) return kRow;
  if (allow_col && b.cols() == 1 && b.rows() == a.rows()) return kCol;
  throw ShapeError(std::string(op) + ": cannot combine " + shape_string(a.shape()) + " with " +
                   shape_string(b.shape()));
}
}  // namespace

Var Graph::matmul(Var a, Var b) {
  const auto& av = node(a).value;
  const auto& bv = node(b).value;
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul: inner dimensions differ, " + shape_string(av.shape()) + " x " +
                     shape_string(bv.shape()));
  }
  Node n;
  n.kind = OpKind::kMatMul;
  n.parents = {a.id, b.id};
  return push(std::move(n));
}

Var Graph::add(Var a, Var b) {
  Node n;
  n.kind = OpKind::kAdd;
  n.parents = {a.id, b.id};
  n.indices = {classify_broadcast(node(a).value, node(b).value, false, "add")};
  return push(std::move(n));
}

Var Graph::sub(Var a, Var b) {
  Node n;
  n.kind = OpKind::kSub;
  n.parents = {a.id, b.id};
  n.indices = {classify_broadcast(node(a).value, node(b).value, false, "sub")};
  return push(std::move(n));
}

Var Graph::mul(Var a, Var b) {
  Node n;
  n.kind = OpKind::kMul;
  n.parents = {a.id, b.id};
  n.indices = {classify_broadcast(node(a).value, node(b).value, true, "mul")};
  return push(std::move(n));
}

Var Graph::scale(Var a, double factor) {
  node(a);
  Node n;
  n.kind = OpKind::kScale;
  n.parents = {a.id};
  n.scalar = factor;
  return push(std::move(n));
}

Var Graph::gelu(Var a) {
  node(a);
  Node n;
  n.kind = OpKind::kGelu;
  n.parents = {a.id};
  return push(std::move(n));
}

Var Graph::layer_norm(Var a, double eps) {
  if (node(a).value.cols() < 2) throw ShapeError("layer_norm: needs at least two columns");
  Node n;
  n.kind = OpKind::kLayerNorm;
  n.parents = {a.id};
  n.scalar = eps;
  return push(std::move(n));
}

Var Graph::softmax(Var a) {
  node(a);
  Node n;
  n.kind = OpKind::kSoftmax;
  n.parents = {a.id};
  return push(std::move(n));
}

Var Graph::log_softmax(Var a) {
  node(a);
  Node n;
  n.kind = OpKind::kLogSoftmax;
  n.parents = {a.id};
  return push(std::move(n));
}

Var Graph::sum(Var a) {
  node(a);
  Node n;
  n.kind = OpKind::kSum;
  n.parents = {a.id};
  return push(std::move(n));
}

Var Graph::mean(Var a) {
  node(a);
  Node n;
  n.kind = OpKind::kMean;
  n.parents = {a.id};
  return push(std::move(n));
}

Var Graph::concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const std::size_t rows = node(parts[0]).value.rows();
  Node n;
  n.kind = OpKind::kConcat;
  for (auto p : parts) {
    const auto& v = node(p).value;
    if (v.rows() != rows) throw ShapeError("concat: row counts differ");
    n.parents.push_back(p.id);
    n.indices.push_back(v.cols());
  }
  return push(std::move(n));
}

Var Graph::slice(Var a, std::size_t begin, std::size_t end) {
  const auto& v = node(a).value;
  if (begin >= end || end > v.cols()) {
    throw ShapeError("slice: bad column range [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") of " + shape_string(v.shape()));
  }
  Node n;
  n.kind = OpKind::kSlice;
  n.parents = {a.id};
  n.indices = {begin, end};
  return push(std::move(n));
}

Var Graph::gather_rows(Var table, std::vector<std::size_t> indices) {
  const auto& v = node(table).value;
  if (indices.empty()) throw ShapeError("gather_rows: no indices");
  for (auto i : indices) {
    if (i >= v.rows()) {
      throw ShapeError("gather_rows: index " + std::to_string(i) + " out of range for " +
                       std::to_string(v.rows()) + " rows");
    }
  }
  Node n;
  n.kind = OpKind::kGatherRows;
  n.parents = {table.id};
  n.indices = std::move(indices);
  return push(std::move(n));
}

Var Graph::gather_cols(Var a, std::vector<std::size_t> indices) {
  const auto& v = node(a).value;
  if (indices.size() != v.rows()) throw ShapeError("gather_cols: need one index per row");
  for (auto i : indices) {
    if (i >= v.cols()) throw ShapeError("gather_cols: column index out of range");
  }
  Node n;
  n.kind = OpKind::kGatherCols;
  n.parents = {a.id};
  n.indices = std::move(indices);
  return push(std::move(n));
}

Var Graph::segment_max(Var a, std::size_t group) {
  const auto& v = node(a).value;
  if (group == 0 || v.rows() % group != 0) {
    throw ShapeError("segment_max: " + std::to_string(v.rows()) +
                     " rows do not split into groups of " + std::to_string(group));
  }
  Node n;
  n.kind = OpKind::kSegmentMax;
  n.parents = {a.id};
  n.indices = {group};
  return push(std::move(n));
}

Var Graph::sinusoidal(Var t, std::size_t dim, double base) {
  const auto& v = node(t).value;
  if (dim == 0 || dim % 2 != 0) throw ShapeError("sinusoidal: dimension must be even and positive");
  if (v.cols() != 1) throw ShapeError("sinusoidal: input must be a column [m, 1]");
  Node n;
  n.kind = OpKind::kSinusoidal;
  n.parents = {t.id};
  n.indices = {dim};
  n.scalar = base;
  return push(std::move(n));
}

Var Graph::stop_gradient(Var a) {
  node(a);
  Node n;
  n.kind = OpKind::kStopGradient;
  n.parents = {a.id};
  return push(std::move(n));
}

const Tensor& Graph::value(Var v) const { return node(v).value; }
OpKind Graph::kind(Var v) const { return node(v).kind; }

void Graph::set_value(Var v, Tensor value) {
  if (node(v).kind != OpKind::kLeaf) throw ShapeError("set_value: not a leaf");
  auto& n = nodes_[v.id];
  if (value.shape() != n.value.shape()) {
    throw ShapeError("set_value: shape " + shape_string(value.shape()) + " does not match " +
                     shape_string(n.value.shape()));
  }
  if (!value.all_finite()) throw NonFiniteError("leaf value contains NaN or Inf");
  n.value = std::move(value);
  stale_ = true;
}

void Graph::forward() {
  for (auto& n : nodes_) {
    if (n.kind != OpKind::kLeaf) evaluate(n);
    n.has_adjoint = false;
    n.has_tangent = false;
  }
  stale_ = false;
}

// ---------------------------------------------------------------------------
// Evaluation

void Graph::evaluate(Node& n) {
  auto in = [&](std::size_t i) -> const Tensor& { return nodes_[n.parents[i]].value; };
  switch (n.kind) {
    case OpKind::kLeaf:
      return;
    case OpKind::kMatMul: {
      const auto& a = in(0);
      const auto& b = in(1);
      Tensor out({a.rows(), b.cols()});
      as_matrix(out).noalias() = as_matrix(a) * as_matrix(b);
      n.value = std::move(out);
      break;
    }
    case OpKind::kAdd:
    case OpKind::kSub:
    case OpKind::kMul: {
      const auto& a = in(0);
      const auto& b = in(1);
      Tensor out(a.shape());
      const std::size_t rows = a.rows(), cols = a.cols();
      const auto mode = n.indices[0];
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
          const std::size_t i = r * cols + c;
          const double bv = mode == kFull ? b[i] : mode == kRow ? b[c] : mode == kCol ? b[r] : b[0];
          out[i] = n.kind == OpKind::kAdd ? a[i] + bv : n.kind == OpKind::kSub ? a[i] - bv : a[i] * bv;
        }
      }
      n.value = std::move(out);
      break;
    }
    case OpKind::kScale: {
      Tensor out = in(0);
      for (auto& v : out.data()) v *= n.scalar;
      n.value = std::move(out);
      break;
    }
    case OpKind::kGelu: {
      Tensor out = in(0);
      for (auto& v : out.data()) v = gelu_value(v);
      n.value = std::move(out);
      break;
    }
    case OpKind::kLayerNorm: {
      const auto& a = in(0);
      const std::size_t rows = a.rows(), cols = a.cols();
      Tensor out(a.shape());
      Tensor rstd({rows, 1});
      for (std::size_t r = 0; r < rows; ++r) {
        const auto x = a.row_span(r);
        double mu = 0.0;
        for (double v : x) mu += v;
        mu /= static_cast<double>(cols);
        double var = 0.0;
        for (double v : x) var += (v - mu) * (v - mu);
        var /= static_cast<double>(cols);
        const double s = 1.0 / std::sqrt(var + n.scalar);
        rstd[r] = s;
        auto y = out.row_span(r);
        for (std::size_t c = 0; c < cols; ++c) y[c] = (x[c] - mu) * s;
      }
      n.value = std::move(out);
      n.cache = std::move(rstd);
      break;
    }
    case OpKind::kSoftmax:
    case OpKind::kLogSoftmax: {
      const auto& a = in(0);
      const std::size_t rows = a.rows(), cols = a.cols();
      Tensor out(a.shape());
      Tensor probs(a.shape());
      for (std::size_t r = 0; r < rows; ++r) {
        const auto x = a.row_span(r);
        const double mx = *std::max_element(x.begin(), x.end());
        double z = 0.0;
        for (double v : x) z += std::exp(v - mx);
        const double lse = mx + std::log(z);
        auto p = probs.row_span(r);
        auto y = out.row_span(r);
        for (std::size_t c = 0; c < cols; ++c) {
          p[c] = std::exp(x[c] - lse);
          y[c] = n.kind == OpKind::kSoftmax ? p[c] : x[c] - lse;
        }
      }
      n.value = std::move(out);
      n.cache = std::move(probs);
      break;
    }
    case OpKind::kSum:
    case OpKind::kMean: {
      const auto& a = in(0);
      double s = 0.0;
      for (double v : a.data()) s += v;
      if (n.kind == OpKind::kMean) s /= static_cast<double>(a.size());
      n.value = Tensor::scalar(s);
      break;
    }
    case OpKind::kConcat: {
      std::size_t total = 0;
      for (auto w : n.indices) total += w;
      const std::size_t rows = in(0).rows();
      Tensor out({rows, total});
      std::size_t offset = 0;
      for (std::size_t p = 0; p < n.parents.size(); ++p) {
        const auto& part = in(p);
        const std::size_t w = n.indices[p];
        for (std::size_t r = 0; r < rows; ++r) {
          std::copy_n(part.row_span(r).begin(), w, out.row_span(r).begin() + offset);
        }
        offset += w;
      }
      n.value = std::move(out);
      break;
    }
    case OpKind::kSlice: {
      const auto& a = in(0);
      const std::size_t b = n.indices[0], e = n.indices[1];
      Tensor out({a.rows(), e - b});
      for (std::size_t r = 0; r < a.rows(); ++r) {
        std::copy(a.row_span(r).begin() + b, a.row_span(r).begin() + e, out.row_span(r).begin());
      }
      n.value = std::move(out);
      break;
    }
    case OpKind::kGatherRows: {
      const auto& a = in(0);
      Tensor out({n.indices.size(), a.cols()});
      for (std::size_t i = 0; i < n.indices.size(); ++i) {
        const auto src = a.row_span(n.indices[i]);
        std::copy(src.begin(), src.end(), out.row_span(i).begin());
      }
      n.value = std::move(out);
      break;
    }
    case OpKind::kGatherCols: {
      const auto& a = in(0);
      Tensor out({a.rows(), 1});
      for (std::size_t r = 0; r < a.rows(); ++r) out[r] = a.at(r, n.indices[r]);
      n.value = std::move(out);
      break;
    }
    case OpKind::kSegmentMax: {
      const auto& a = in(0);
      const std::size_t group = n.indices[0];
      const std::size_t m = a.rows() / group, cols = a.cols();
      Tensor out({m, cols});
      Tensor arg({m, cols});
      for (std::size_t s = 0; s < m; ++s) {
        for (std::size_t c = 0; c < cols; ++c) {
          std::size_t best = s * group;
          double bv = a.at(best, c);
          for (std::size_t p = 1; p < group; ++p) {
            const double v = a.at(s * group + p, c);
            if (v > bv) {
              bv = v;
              best = s * group + p;
            }
          }
          out.at(s, c) = bv;
          arg.at(s, c) = static_cast<double>(best);
        }
      }
      n.value = std::move(out);
      n.cache = std::move(arg);
      break;
    }
    case OpKind::kSinusoidal: {
      const auto& t = in(0);
      const std::size_t dim = n.indices[0];
      Tensor out({t.rows(), dim});
      for (std::size_t r = 0; r < t.rows(); ++r) {
        for (std::size_t i = 0; i < dim / 2; ++i) {
          const double w = sinusoid_frequency(i, dim, n.scalar);
          out.at(r, 2 * i) = std::sin(w * t[r]);
          out.at(r, 2 * i + 1) = std::cos(w * t[r]);
        }
      }
      n.value = std::move(out);
      break;
    }
    case OpKind::kStopGradient:
      n.value = in(0);
      break;
  }
  if (!n.value.all_finite()) {
    throw NonFiniteError(std::string("non-finite value produced by ") +
                         std::string(op_name(n.kind)));
  }
}

// ---------------------------------------------------------------------------
// Reverse mode

void Graph::accumulate(std::uint32_t id, const Tensor& contribution) {
  auto& p = nodes_[id];
  if (!p.requires_grad) return;
  if (!p.has_adjoint) {
    p.adjoint = contribution;
    p.has_adjoint = true;
    return;
  }
  auto dst = p.adjoint.data();
  const auto src = contribution.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void Graph::accumulate_broadcast(std::uint32_t id, const Tensor& full, std::size_t mode) {
  auto& p = nodes_[id];
  if (!p.requires_grad) return;
  if (mode == kFull) {
    accumulate(id, full);
    return;
  }
  Tensor reduced(p.value.shape());
  const std::size_t rows = full.rows(), cols = full.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double g = full.at(r, c);
      if (mode == kRow) reduced[c] += g;
      else if (mode == kCol) reduced[r] += g;
      else reduced[0] += g;
    }
  }
  accumulate(id, reduced);
}

void Graph::backward(Var output) {
  const auto& out = node(output).value;
  backward(output, Tensor::full(out.shape(), 1.0));
}

void Graph::backward(Var output, const Tensor& output_adjoint) {
  if (nodes_.empty()) throw Error("backward: graph is empty");
  if (stale_) throw Error("backward: leaf values changed since the last forward pass");
  const auto& out = node(output);
  if (output_adjoint.shape() != out.value.shape()) {
    throw ShapeError("backward: adjoint shape " + shape_string(output_adjoint.shape()) +
                     " does not match output " + shape_string(out.value.shape()));
  }
  for (auto& n : nodes_) n.has_adjoint = false;
  if (!out.requires_grad) return;
  nodes_[output.id].adjoint = output_adjoint;
  nodes_[output.id].has_adjoint = true;
  for (std::size_t i = output.id + 1; i-- > 0;) {
    const auto& n = nodes_[i];
    if (n.has_adjoint && n.kind != OpKind::kLeaf) backprop(n);
  }
}

void Graph::backprop(const Node& n) {
  const double ff = fault_factor(n.kind);
  auto in = [&](std::size_t i) -> const Tensor& { return nodes_[n.parents[i]].value; };
  auto needs = [&](std::size_t i) { return nodes_[n.parents[i]].requires_grad; };
  auto emit = [&](std::size_t i, Tensor g) {
    if (ff != 1.0) {
      for (auto& v : g.data()) v *= ff;
    }
    accumulate(n.parents[i], g);
  };
  const Tensor& dy = n.adjoint;

  switch (n.kind) {
    case OpKind::kLeaf:
    case OpKind::kStopGradient:
      return;
    case OpKind::kMatMul: {
      const auto& a = in(0);
      const auto& b = in(1);
      if (needs(0)) {
        Tensor ga(a.shape());
        as_matrix(ga).noalias() = as_matrix(dy) * as_matrix(b).transpose();
        emit(0, std::move(ga));
      }
      if (needs(1)) {
        Tensor gb(b.shape());
        as_matrix(gb).noalias() = as_matrix(a).transpose() * as_matrix(dy);
        emit(1, std::move(gb));
      }
      return;
    }
    case OpKind::kAdd:
    case OpKind::kSub: {
      if (needs(0)) emit(0, dy);
      if (needs(1)) {
        Tensor g = dy;
        if (n.kind == OpKind::kSub) {
          for (auto& v : g.data()) v = -v;
        }
        if (ff != 1.0) {
          for (auto& v : g.data()) v *= ff;
        }
        accumulate_broadcast(n.parents[1], g, n.indices[0]);
      }
      return;
    }
    case OpKind::kMul: {
      const auto& a = in(0);
      const auto& b = in(1);
      const auto mode = n.indices[0];
      const std::size_t rows = a.rows(), cols = a.cols();
      auto bval = [&](std::size_t r, std::size_t c) {
        const std::size_t i = r * cols + c;
        return mode == kFull ? b[i] : mode == kRow ? b[c] : mode == kCol ? b[r] : b[0];
      };
      if (needs(0)) {
        Tensor g(a.shape());
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] = dy[r * cols + c] * bval(r, c);
        emit(0, std::move(g));
      }
      if (needs(1)) {
        Tensor g(a.shape());
        for (std::size_t i = 0; i < a.size(); ++i) g[i] = dy[i] * a[i] * ff;
        accumulate_broadcast(n.parents[1], g, mode);
      }
      return;
    }
    case OpKind::kScale: {
      Tensor g = dy;
      for (auto& v : g.data()) v *= n.scalar;
      emit(0, std::move(g));
      return;
    }
    case OpKind::kGelu: {
      const auto& a = in(0);
      Tensor g(a.shape());
      for (std::size_t i = 0; i < a.size(); ++i) g[i] = dy[i] * gelu_grad(a[i]);
      emit(0, std::move(g));
      return;
    }
    case OpKind::kLayerNorm: {
      const auto& y = n.value;
      const std::size_t rows = y.rows(), cols = y.cols();
      Tensor g(y.shape());
      for (std::size_t r = 0; r < rows; ++r) {
        double mdy = 0.0, mdyy = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
          mdy += dy.at(r, c);
          mdyy += dy.at(r, c) * y.at(r, c);
        }
        mdy /= static_cast<double>(cols);
        mdyy /= static_cast<double>(cols);
        const double s = n.cache[r];
        for (std::size_t c = 0; c < cols; ++c) {
          g.at(r, c) = s * (dy.at(r, c) - mdy - y.at(r, c) * mdyy);
        }
      }
      emit(0, std::move(g));
      return;
    }
    case OpKind::kSoftmax: {
      const auto& y = n.value;
      Tensor g(y.shape());
      for (std::size_t r = 0; r < y.rows(); ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < y.cols(); ++c) dot += dy.at(r, c) * y.at(r, c);
        for (std::size_t c = 0; c < y.cols(); ++c) g.at(r, c) = y.at(r, c) * (dy.at(r, c) - dot);
      }
      emit(0, std::move(g));
      return;
    }
    case OpKind::kLogSoftmax: {
      const auto& p = n.cache;
      Tensor g(p.shape());
      for (std::size_t r = 0; r < p.rows(); ++r) {
        double total = 0.0;
        for (std::size_t c = 0; c < p.cols(); ++c) total += dy.at(r, c);
        for (std::size_t c = 0; c < p.cols(); ++c) g.at(r, c) = dy.at(r, c) - p.at(r, c) * total;
      }
      emit(0, std::move(g));
      return;
    }
    case OpKind::kSum:
    case OpKind::kMean: {
      const auto& a = in(0);
      double v = dy[0];
      if (n.kind == OpKind::kMean) v /= static_cast<double>(a.size());
      emit(0, Tensor::full(a.shape(), v));
      return;
    }
    case OpKind::kConcat: {
      std::size_t offset = 0;
      const std::size_t rows = dy.rows();
      for (std::size_t p = 0; p < n.parents.size(); ++p) {
        const std::size_t w = n.indices[p];
        if (needs(p)) {
          Tensor g(in(p).shape());
          for (std::size_t r = 0; r < rows; ++r) {
            std::copy_n(dy.row_span(r).begin() + offset, w, g.row_span(r).begin());
          }
          emit(p, std::move(g));
        }
        offset += w;
      }
      return;
    }
    case OpKind::kSlice: {
      const auto& a = in(0);
      Tensor g(a.shape());
      const std::size_t b = n.indices[0];
      for (std::size_t r = 0; r < a.rows(); ++r) {
        std::copy(dy.row_span(r).begin(), dy.row_span(r).end(), g.row_span(r).begin() + b);
      }
      emit(0, std::move(g));
      return;
    }
    case OpKind::kGatherRows: {
      const auto& a = in(0);
      Tensor g(a.shape());
      for (std::size_t i = 0; i < n.indices.size(); ++i) {
        auto dst = g.row_span(n.indices[i]);
        const auto src = dy.row_span(i);
        for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
      }
      emit(0, std::move(g));
      return;
    }
    case OpKind::kGatherCols: {
      const auto& a = in(0);
      Tensor g(a.shape());
      for (std::size_t r = 0; r < a.rows(); ++r) g.at(r, n.indices[r]) = dy[r];
      emit(0, std::move(g));
      return;
    }
    case OpKind::kSegmentMax: {
      const auto& a = in(0);
      Tensor g(a.shape());
      const std::size_t cols = a.cols();
      for (std::size_t s = 0; s < n.value.rows(); ++s) {
        for (std::size_t c = 0; c < cols; ++c) {
          const auto row = static_cast<std::size_t>(n.cache.at(s, c));
          g.at(row, c) += dy.at(s, c);
        }
      }
      emit(0, std::move(g));
      return;
    }
    case OpKind::kSinusoidal: {
      const auto& t = in(0);
      const std::size_t dim = n.indices[0];
      Tensor g(t.shape());
      for (std::size_t r = 0; r < t.rows(); ++r) {
        double acc = 0.0;
        for (std::size_t i = 0; i < dim / 2; ++i) {
          const double w = sinusoid_frequency(i, dim, n.scalar);
          acc += w * (std::cos(w * t[r]) * dy.at(r, 2 * i) - std::sin(w * t[r]) * dy.at(r, 2 * i + 1));
        }
        g[r] = acc;
      }
      emit(0, std::move(g));
      return;
    }
  }
}

Tensor Graph::grad(Var v) const {
  const auto& n = node(v);
  if (n.has_adjoint) return n.adjoint;
  return Tensor(n.value.shape());
}

// ---------------------------------------------------------------------------
// Forward mode

void Graph::jvp(std::span<const std::pair<Var, Tensor>> seeds) {
  if (stale_) throw Error("jvp: leaf values changed since the last forward pass");
  for (auto& n : nodes_) n.has_tangent = false;
  for (const auto& [v, t] : seeds) {
    if (node(v).kind != OpKind::kLeaf) throw ShapeError("jvp: seed is not a leaf");
    auto& n = nodes_[v.id];
    if (t.size() != n.value.size()) {
      throw ShapeError("jvp: tangent shape " + shape_string(t.shape()) + " does not match " +
                       shape_string(n.value.shape()));
    }
    n.tangent = t.reshaped(n.value.shape());
    n.has_tangent = true;
  }
  for (auto& n : nodes_) {
    if (n.kind != OpKind::kLeaf) propagate_tangent(n);
  }
}

Tensor Graph::tangent(Var v) const {
  const auto& n = node(v);
  if (n.has_tangent) return n.tangent;
  return Tensor(n.value.shape());
}

void Graph::propagate_tangent(Node& n) {
  bool any = false;
  for (auto p : n.parents) any = any || nodes_[p].has_tangent;
  if (!any || n.kind == OpKind::kStopGradient) {
    n.has_tangent = false;
    return;
  }
  auto in = [&](std::size_t i) -> const Tensor& { return nodes_[n.parents[i]].value; };
  auto has = [&](std::size_t i) { return nodes_[n.parents[i]].has_tangent; };
  auto tan = [&](std::size_t i) -> const Tensor& { return nodes_[n.parents[i]].tangent; };
  Tensor out(n.value.shape());

  switch (n.kind) {
    case OpKind::kLeaf:
    case OpKind::kStopGradient:
      return;
    case OpKind::kMatMul: {
      auto o = as_matrix(out);
      if (has(0)) o.noalias() += as_matrix(tan(0)) * as_matrix(in(1));
      if (has(1)) o.noalias() += as_matrix(in(0)) * as_matrix(tan(1));
      break;
    }
    case OpKind::kAdd:
    case OpKind::kSub:
    case OpKind::kMul: {
      const auto& a = in(0);
      const auto& b = in(1);
      const auto mode = n.indices[0];
      const std::size_t rows = a.rows(), cols = a.cols();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
          const std::size_t i = r * cols + c;
          const std::size_t j = mode == kFull ? i : mode == kRow ? c : mode == kCol ? r : 0;
          const double da = has(0) ? tan(0)[i] : 0.0;
          const double db = has(1) ? tan(1)[j] : 0.0;
          if (n.kind == OpKind::kAdd) out[i] = da + db;
          else if (n.kind == OpKind::kSub) out[i] = da - db;
          else out[i] = da * b[j] + a[i] * db;
        }
      }
      break;
    }
    case OpKind::kScale: {
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = tan(0)[i] * n.scalar;
      break;
    }
    case OpKind::kGelu: {
      const auto& a = in(0);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = tan(0)[i] * gelu_grad(a[i]);
      break;
    }
    case OpKind::kLayerNorm: {
      const auto& y = n.value;
      const auto& dx = tan(0);
      const std::size_t rows = y.rows(), cols = y.cols();
      for (std::size_t r = 0; r < rows; ++r) {
        double mdx = 0.0, mdxy = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
          mdx += dx.at(r, c);
          mdxy += dx.at(r, c) * y.at(r, c);
        }
        mdx /= static_cast<double>(cols);
        mdxy /= static_cast<double>(cols);
        const double s = n.cache[r];
        for (std::size_t c = 0; c < cols; ++c) {
          out.at(r, c) = s * (dx.at(r, c) - mdx - y.at(r, c) * mdxy);
        }
      }
      break;
    }
    case OpKind::kSoftmax: {
      const auto& y = n.value;
      const auto& dx = tan(0);
      for (std::size_t r = 0; r < y.rows(); ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < y.cols(); ++c) dot += dx.at(r, c) * y.at(r, c);
        for (std::size_t c = 0; c < y.cols(); ++c) out.at(r, c) = y.at(r, c) * (dx.at(r, c) - dot);
      }
      break;
    }
    case OpKind::kLogSoftmax: {
      const auto& p = n.cache;
      const auto& dx = tan(0);
      for (std::size_t r = 0; r < p.rows(); ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < p.cols(); ++c) dot += dx.at(r, c) * p.at(r, c);
        for (std::size_t c = 0; c < p.cols(); ++c) out.at(r, c) = dx.at(r, c) - dot;
      }
      break;
    }
    case OpKind::kSum:
    case OpKind::kMean: {
      double s = 0.0;
      for (double v : tan(0).data()) s += v;
      if (n.kind == OpKind::kMean) s /= static_cast<double>(in(0).size());
      out[0] = s;
      break;
    }
    case OpKind::kConcat: {
      std::size_t offset = 0;
      const std::size_t rows = out.rows();
      for (std::size_t p = 0; p < n.parents.size(); ++p) {
        const std::size_t w = n.indices[p];
        if (has(p)) {
          for (std::size_t r = 0; r < rows; ++r) {
            std::copy_n(tan(p).row_span(r).begin(), w, out.row_span(r).begin() + offset);
          }
        }
        offset += w;
      }
      break;
    }
    case OpKind::kSlice: {
      const std::size_t b = n.indices[0], e = n.indices[1];
      for (std::size_t r = 0; r < out.rows(); ++r) {
        std::copy(tan(0).row_span(r).begin() + b, tan(0).row_span(r).begin() + e,
                  out.row_span(r).begin());
      }
      break;
    }
    case OpKind::kGatherRows: {
      for (std::size_t i = 0; i < n.indices.size(); ++i) {
        const auto src = tan(0).row_span(n.indices[i]);
        std::copy(src.begin(), src.end(), out.row_span(i).begin());
      }
      break;
    }
    case OpKind::kGatherCols: {
      for (std::size_t r = 0; r < out.rows(); ++r) out[r] = tan(0).at(r, n.indices[r]);
      break;
    }
    case OpKind::kSegmentMax: {
      for (std::size_t s = 0; s < out.rows(); ++s) {
        for (std::size_t c = 0; c < out.cols(); ++c) {
          const auto row = static_cast<std::size_t>(n.cache.at(s, c));
          out.at(s, c) = tan(0).at(row, c);
        }
      }
      break;
    }
    case OpKind::kSinusoidal: {
      const auto& t = in(0);
      const std::size_t dim = n.indices[0];
      for (std::size_t r = 0; r < t.rows(); ++r) {
        const double dt = tan(0)[r];
        for (std::size_t i = 0; i < dim / 2; ++i) {
          const double w = sinusoid_frequency(i, dim, n.scalar);
          out.at(r, 2 * i) = w * std::cos(w * t[r]) * dt;
          out.at(r, 2 * i + 1) = -w * std::sin(w * t[r]) * dt;
        }
      }
      break;
    }
  }
  if (!out.all_finite()) {
    throw NonFiniteError(std::string("non-finite tangent produced by ") +
                         std::string(op_name(n.kind)));
  }
  n.tangent = std::move(out);
  n.has_tangent = true;
}

}  // namespace modeflow
