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

#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "modeflow/tensorcore/tensor.hpp"

namespace modeflow {

enum class OpKind : std::uint8_t {
  kLeaf,
  kMatMul,
  kAdd,
  kSub,
  kMul,
  kScale,
  kGelu,
  kLayerNorm,
  kSoftmax,
  kLogSoftmax,
  kSum,
  kMean,
  kConcat,
  kSlice,
  kGatherRows,
  kGatherCols,
  kSegmentMax,
  kSinusoidal,
  kStopGradient,
};

std::string_view op_name(OpKind kind);

// Handle to a node of a Graph. Only meaningful for the graph that made it.
struct Var {
  std::uint32_t id = UINT32_MAX;
  bool valid() const { return id != UINT32_MAX; }
};

// Tape of eagerly evaluated operations supporting reverse-mode adjoints and
// forward-mode tangents (Jacobian-vector products).
//
// Every op is evaluated when it is recorded. Leaf values may be replaced with
// set_value(); the tape is then stale until forward() replays it. All values
// are checked for NaN/Inf as they are produced.
//
// Broadcasting is limited to what the networks need: the second operand of
// add/sub/mul may be a full tensor of the same shape, a single row [1, n]
// (or rank-1 [n]) repeated over the rows of the first, or a single element.
// mul additionally accepts a column [m, 1].
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  Var leaf(Tensor value, bool requires_grad);
  Var input(Tensor value) { return leaf(std::move(value), false); }
  Var param(Tensor value) { return leaf(std::move(value), true); }

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double factor);
  Var gelu(Var a);
  // Normalizes each row to zero mean and unit variance (no affine part).
  Var layer_norm(Var a, double eps = 1e-5);
  Var softmax(Var a);
  Var log_softmax(Var a);
  Var sum(Var a);
  Var mean(Var a);
  // Column-wise concatenation of tensors with equal row counts.
  Var concat(std::span<const Var> parts);
  Var concat(std::initializer_list<Var> parts) {
    return concat(std::span<const Var>(parts.begin(), parts.size()));
  }
  // Columns [begin, end) of every row.
  Var slice(Var a, std::size_t begin, std::size_t end);
  // Row lookup: out[i] = table[indices[i]].
  Var gather_rows(Var table, std::vector<std::size_t> indices);
  // One element per row: out[i, 0] = a[i, indices[i]].
  Var gather_cols(Var a, std::vector<std::size_t> indices);
  // Max over consecutive groups of `group` rows: [m*group, n] -> [m, n].
  // Ties route gradient to the lowest row.
  Var segment_max(Var a, std::size_t group);
  // [m, 1] -> [m, dim]; interleaved (sin(w_i t), cos(w_i t)),
  // w_i = base^(-2i/dim).
  Var sinusoidal(Var t, std::size_t dim, double base = 10000.0);
  Var stop_gradient(Var a);

  const Tensor& value(Var v) const;
  OpKind kind(Var v) const;
  std::size_t size() const { return nodes_.size(); }
  bool stale() const { return stale_; }

  void set_value(Var leaf, Tensor value);
  // Re-evaluates every recorded op from the current leaf values.
  void forward();

  // Reverse sweep seeded with `output_adjoint` (ones if omitted).
  void backward(Var output);
  void backward(Var output, const Tensor& output_adjoint);
  // Adjoint of `v` after backward(); zeros if `v` was not reached.
  Tensor grad(Var v) const;

  // Forward sweep of tangents. Leaves listed in `seeds` get the given
  // tangent, every other leaf a zero tangent.
  void jvp(std::span<const std::pair<Var, Tensor>> seeds);
  void jvp(std::initializer_list<std::pair<Var, Tensor>> seeds) {
    jvp(std::span<const std::pair<Var, Tensor>>(seeds.begin(), seeds.size()));
  }
  // Tangent of `v` after jvp(); zeros if `v` does not depend on a seed.
  Tensor tangent(Var v) const;

 private:
  struct Node {
    OpKind kind = OpKind::kLeaf;
    std::vector<std::uint32_t> parents;
    Tensor value;
    Tensor adjoint;
    Tensor tangent;
    bool requires_grad = false;
    bool has_adjoint = false;
    bool has_tangent = false;
    std::vector<std::size_t> indices;
    double scalar = 0.0;
    Tensor cache;
  };

  Var push(Node node);
  const Node& node(Var v) const;
  void evaluate(Node& n);
  void backprop(const Node& n);
  void propagate_tangent(Node& n);
  void accumulate(std::uint32_t id, const Tensor& contribution);
  void accumulate_broadcast(std::uint32_t id, const Tensor& full, std::size_t mode);

  std::deque<Node> nodes_;
  bool stale_ = false;
};

namespace testing {
// Perturbs the reverse rule of `kind` by a relative 1e-2 so that gradient
// checks can be shown to catch a broken op. Pass std::nullopt to clear.
void inject_backward_fault(std::optional<OpKind> kind);
std::optional<OpKind> injected_backward_fault();
}  // namespace testing

}  // namespace modeflow
