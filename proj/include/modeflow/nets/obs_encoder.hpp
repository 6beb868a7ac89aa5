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

#include <optional>
#include <vector>

#include "modeflow/nets/mlp.hpp"

namespace modeflow::nets {

// A batch of observations. Scenes are usually shared by many rows, so point
// sets are stored once and referenced by index.
struct ObsBatch {
  std::vector<Tensor> point_sets;       // each [P, 3], same P for all
  std::vector<std::size_t> set_index;   // per row, into point_sets
  Tensor proprio;                       // [B, d_s]
  std::optional<Tensor> sensor;         // [B, d_f]; absent encodes as zeros
  std::size_t rows() const { return set_index.size(); }
};

struct ObsEncoderConfig {
  std::size_t proprio_dim = 4;
  std::size_t sensor_dim = 0;  // 0 disables the sensor branch
  std::size_t point_hidden = 32;
  std::size_t point_out = 64;
  std::size_t proprio_out = 64;
  std::size_t sensor_out = 16;
  std::size_t fusion_hidden = 128;
  std::size_t out_dim = 64;
};

class ObsEncoder {
 public:
  ObsEncoder() = default;
  ObsEncoder(const ObsEncoderConfig& config, const std::string& prefix, ParamStore& store,
             Rng& rng);

  // [B, out_dim]
  Var forward(const BoundParams& params, const ObsBatch& obs) const;

  const ObsEncoderConfig& config() const { return config_; }
  std::size_t out_dim() const { return config_.out_dim; }

 private:
  ObsEncoderConfig config_;
  Mlp point_mlp_, proprio_mlp_, sensor_mlp_, fusion_mlp_;
};

}  // namespace modeflow::nets
