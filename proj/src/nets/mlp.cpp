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

#include "modeflow/nets/mlp.hpp"

#include "modeflow/tensorcore/error.hpp"

namespace modeflow::nets {

void validate(const MlpConfig& config) {
  if (config.widths.size() < 2) throw ValidationError("mlp needs at least one layer");
  for (auto w : config.widths) {
    if (w == 0) throw ValidationError("mlp widths must be positive");
  }
  if (config.activation != "gelu") {
    throw ValidationError("unsupported activation '" + config.activation + "' (only gelu)");
  }
}

Mlp::Mlp(const MlpConfig& config, const std::string& prefix, ParamStore& store, Rng& rng)
    : config_(config) {
  validate(config_);
  const auto& w = config_.widths;
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    const std::string tag = prefix + "/l" + std::to_string(i);
    Layer layer;
    layer.weight = store.add(tag + "/w", fan_in_uniform(w[i], w[i + 1], rng));
    layer.bias = store.add(tag + "/b", Tensor({1, w[i + 1]}));
    const bool hidden = i + 2 < w.size() || !config_.final_linear;
    if (config_.layer_norm && hidden && w[i + 1] >= 2) {
      layer.norm = std::make_pair(store.add(tag + "/ln_gain", Tensor::full({1, w[i + 1]}, 1.0)),
                                  store.add(tag + "/ln_shift", Tensor({1, w[i + 1]})));
    }
    layers_.push_back(layer);
  }
}

Var Mlp::forward(const BoundParams& params, Var x) const {
  Graph& g = params.graph();
  if (g.value(x).cols() != in_width()) {
    throw ShapeError("mlp expects width " + std::to_string(in_width()) + ", got " +
                     shape_string(g.value(x).shape()));
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& layer = layers_[i];
    x = g.add(g.matmul(x, params[layer.weight]), params[layer.bias]);
    const bool last = i + 1 == layers_.size();
    if (layer.norm) {
      x = g.add(g.mul(g.layer_norm(x), params[layer.norm->first]), params[layer.norm->second]);
    }
    if (!last || !config_.final_linear) x = g.gelu(x);
  }
  return x;
}

std::pair<std::size_t, std::size_t> Mlp::last_layer() const {
  return {layers_.back().weight, layers_.back().bias};
}

}  // namespace modeflow::nets
