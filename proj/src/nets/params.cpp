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

#include "modeflow/nets/params.hpp"

#include <cmath>

#include "modeflow/tensorcore/error.hpp"

namespace modeflow::nets {

std::size_t ParamStore::add(std::string name, Tensor value) {
  if (find(name)) throw ValidationError("duplicate parameter name " + name);
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
  return values_.size() - 1;
}

std::optional<std::size_t> ParamStore::find(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

std::size_t ParamStore::numel() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

Tensor fan_in_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor w({fan_in, fan_out});
  for (auto& v : w.data()) v = rng.uniform(-bound, bound);
  return w;
}

BoundParams::BoundParams(Graph& graph, const ParamStore& store, bool trainable)
    : graph_(&graph) {
  vars_.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    vars_.push_back(graph.leaf(store.value(i), trainable));
  }
}

std::vector<Tensor> BoundParams::grads() const {
  std::vector<Tensor> out;
  out.reserve(vars_.size());
  for (auto v : vars_) out.push_back(graph_->grad(v));
  return out;
}

}  // namespace modeflow::nets
