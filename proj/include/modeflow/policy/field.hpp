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
#include <functional>
#include <string>
#include <vector>

#include "modeflow/nets/embedding.hpp"
#include "modeflow/nets/mlp.hpp"
#include "modeflow/nets/params.hpp"
#include "modeflow/tensorcore/graph.hpp"
#include "modeflow/tensorcore/rng.hpp"

namespace modeflow::policy {

// Average velocity field v(z_r, tau, r; o, m) over flattened chunks.
//
// Path convention: data sits at r = 0 and noise at r = 1,
//   z_r = (1 - r) * x + r * z0,   v = z0 - x,
// so z_tau = z_r - (r - tau) * v(z_r, tau, r) and one step from pure noise
// is x = z0 - v(z0, 0, 1).
struct FieldConfig {
  std::size_t flat = 32;        // T_p * d_a
  std::size_t obs_dim = 64;     // width of the observation embedding
  std::size_t obs_proj = 64;    // width of the projected observation
  std::size_t modes = 0;        // 0 disables the mode embedding
  std::size_t mode_dim = 32;
  std::size_t time_dim = 16;    // per time input
  double time_scale = 20.0;     // t is embedded as sinusoidal(scale * t)
  double time_base = 100.0;
  std::size_t hidden = 128;
  std::size_t depth = 3;        // hidden layers of the trunk
  std::size_t cond_dim() const {
    return 2 * time_dim + obs_proj + (modes > 0 ? mode_dim : 0);
  }
};

void validate(const FieldConfig& config);

class VelocityField {
 public:
  VelocityField() = default;
  VelocityField(const FieldConfig& config, const std::string& prefix, nets::ParamStore& store,
                Rng& rng);

  // z: [B, flat]; tau, r: [B, 1]; obs: [B, obs_dim]; modes: B ids or empty
  // when the field has no mode embedding.
  Var forward(const nets::BoundParams& p, Var z, Var tau, Var r, Var obs,
              const std::vector<std::size_t>& modes) const;
  const FieldConfig& config() const { return config_; }

 private:
  FieldConfig config_;
  nets::Mlp obs_proj_, trunk_;
  nets::ModeEmbedding mode_table_;
};

// One training batch on the flow path. Every row has its own interval.
struct FlowSample {
  Tensor z0;      // [B, F] noise
  Tensor tau, r;  // [B, 1], 0 <= tau <= r <= 1
  Tensor z_r;     // interpolant
  Tensor v;       // conditional velocity z0 - x
};

FlowSample make_flow_sample(const Tensor& data, Tensor z0, Tensor tau, Tensor r);

// Two sorted uniforms per row; with probability `equal_prob` tau = r.
std::pair<Tensor, Tensor> sample_intervals(std::size_t rows, Rng& rng, double equal_prob = 0.25);

// Field closed over its parameters and conditioning, built in `g`.
using FieldFn = std::function<Var(Graph& g, Var z, Var tau, Var r)>;

// v - (r - tau) * (v dv/dz + dv/dr), where `dudt` is the Jacobian-vector
// product of the field at (z_r, tau, r) with tangent (v, 0, 1).
Tensor meanflow_target_from(const FlowSample& s, const Tensor& dudt);

// Same target with the JVP evaluated in a private graph. The result is a
// plain tensor, i.e. it carries no gradient.
Tensor meanflow_target(const FlowSample& s, const FieldFn& field);

// Mean over rows of the squared distance to a constant target.
Var mean_sqdist(Graph& g, Var pred, const Tensor& target);

}  // namespace modeflow::policy
