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

#include <string>
#include <vector>

#include "modeflow/nets/params.hpp"

namespace modeflow::nets {

struct MlpConfig {
  std::vector<std::size_t> widths;  // input width first, output width last
  std::string activation = "gelu";
  bool final_linear = true;  // no activation after the last layer
  bool layer_norm = false;   // affine LayerNorm before each hidden activation
};

void validate(const MlpConfig& config);

class Mlp {
 public:
  Mlp() = default;
  Mlp(const MlpConfig& config, const std::string& prefix, ParamStore& store, Rng& rng);

  Var forward(const BoundParams& params, Var x) const;

  std::size_t in_width() const { return config_.widths.front(); }
  std::size_t out_width() const { return config_.widths.back(); }
  const MlpConfig& config() const { return config_; }
  // Parameter indices of the last linear layer (weight, bias).
  std::pair<std::size_t, std::size_t> last_layer() const;

 private:
  struct Layer {
    std::size_t weight, bias;
    std::optional<std::pair<std::size_t, std::size_t>> norm;  // gain, shift
  };
  MlpConfig config_;
  std::vector<Layer> layers_;
};

}  // namespace modeflow::nets
