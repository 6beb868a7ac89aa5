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
#include <optional>
#include <string>
#include <vector>

#include "modeflow/tensorcore/graph.hpp"
#include "modeflow/tensorcore/rng.hpp"

namespace modeflow::nets {

// Ordered collection of named trainable tensors. Modules keep indices into
// a store; the owning training loop is the only writer.
class ParamStore {
 public:
  std::size_t add(std::string name, Tensor value);
  std::size_t size() const { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  const Tensor& value(std::size_t i) const { return values_.at(i); }
  Tensor& value(std::size_t i) { return values_.at(i); }
  std::optional<std::size_t> find(const std::string& name) const;
  std::size_t numel() const;

  friend bool operator==(const ParamStore&, const ParamStore&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
};

// Weight init: uniform in +-1/sqrt(fan_in).
Tensor fan_in_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

// The leaves of one store inside one graph.
class BoundParams {
 public:
  BoundParams(Graph& graph, const ParamStore& store, bool trainable);

  Var operator[](std::size_t i) const { return vars_.at(i); }
  Graph& graph() const { return *graph_; }
  // Adjoints of every parameter after graph.backward().
  std::vector<Tensor> grads() const;

 private:
  Graph* graph_;
  std::vector<Var> vars_;
};

}  // namespace modeflow::nets
