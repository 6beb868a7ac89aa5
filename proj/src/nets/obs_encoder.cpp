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

#include "modeflow/nets/obs_encoder.hpp"

#include "modeflow/tensorcore/error.hpp"

namespace modeflow::nets {

ObsEncoder::ObsEncoder(const ObsEncoderConfig& config, const std::string& prefix,
                       ParamStore& store, Rng& rng)
    : config_(config) {
  if (config.proprio_dim == 0) throw ValidationError("proprio dim must be positive");
  point_mlp_ = Mlp({{3, config.point_hidden, config.point_out}, "gelu", false, true},
                   prefix + "/point", store, rng);
  proprio_mlp_ = Mlp({{config.proprio_dim, config.proprio_out}, "gelu", false, false},
                     prefix + "/proprio", store, rng);
  std::size_t fused = config.point_out + config.proprio_out;
  if (config.sensor_dim > 0) {
    sensor_mlp_ = Mlp({{config.sensor_dim, config.sensor_out}, "gelu", false, false},
                      prefix + "/sensor", store, rng);
    fused += config.sensor_out;
  }
  fusion_mlp_ = Mlp({{fused, config.fusion_hidden, config.out_dim}, "gelu", true, false},
                    prefix + "/fusion", store, rng);
}

Var ObsEncoder::forward(const BoundParams& params, const ObsBatch& obs) const {
  Graph& g = params.graph();
  const std::size_t b = obs.rows();
  if (b == 0) throw ShapeError("observation batch is empty");
  if (obs.point_sets.empty()) throw ValidationError("observation has an empty point set");
  const std::size_t p = obs.point_sets.front().rows();
  std::vector<double> stacked;
  stacked.reserve(obs.point_sets.size() * p * 3);
  for (const auto& set : obs.point_sets) {
    if (set.rows() != p || set.cols() != 3) {
      throw ShapeError("point sets must all be [" + std::to_string(p) + ", 3], got " +
                       shape_string(set.shape()));
    }
    stacked.insert(stacked.end(), set.vec().begin(), set.vec().end());
  }
  for (auto i : obs.set_index) {
    if (i >= obs.point_sets.size()) throw ShapeError("point set index out of range");
  }
  if (obs.proprio.rows() != b || obs.proprio.cols() != config_.proprio_dim) {
    throw ShapeError("proprio must be [" + std::to_string(b) + ", " +
                     std::to_string(config_.proprio_dim) + "], got " +
                     shape_string(obs.proprio.shape()));
  }

  Var pts = g.input(Tensor::matrix(obs.point_sets.size() * p, 3, std::move(stacked)));
  Var pooled = g.segment_max(point_mlp_.forward(params, pts), p);
  Var scene = g.gather_rows(pooled, obs.set_index);
  std::vector<Var> parts{scene, proprio_mlp_.forward(params, g.input(obs.proprio))};
  if (config_.sensor_dim > 0) {
    Tensor sensor = obs.sensor ? *obs.sensor : Tensor({b, config_.sensor_dim});
    if (sensor.rows() != b || sensor.cols() != config_.sensor_dim) {
      throw ShapeError("sensor must be [" + std::to_string(b) + ", " +
                       std::to_string(config_.sensor_dim) + "]");
    }
    parts.push_back(sensor_mlp_.forward(params, g.input(std::move(sensor))));
  }
  return fusion_mlp_.forward(params, g.concat(parts));
}

}  // namespace modeflow::nets
