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

#include <vector>

#include "modeflow/synthenv/env.hpp"
#include "modeflow/tensorcore/rng.hpp"

namespace modeflow::synthenv {

// Per-demonstration variation inside one mode.
struct ExpertStyle {
  double width = 1.0;  // multiplies the nominal lateral excursion
  double speed = 1.6;  // path speed, units per second
};

ExpertStyle sample_style(Rng& rng);

// Reference path of a mode, densely sampled from the start to its goal.
// fork2d: half ellipse x = -+w sin(pi s), y = -cos(pi s) (mode 0 passes left).
// bins:   quadratic Bezier from the start to bin k, bulging outward.
std::vector<Vec2> mode_path(const EnvSpec& env, std::size_t mode, const ExpertStyle& style);

// Pure pursuit along the mode path for `steps` steps from `state`. Once the
// goal is reached the last action is held. A state already at a goal
// yields an all-zero plan.  Returns [steps, action_dim].
Tensor expert_plan(const EnvSpec& env, const EnvState& state, std::size_t mode,
                   const ExpertStyle& style, std::size_t steps);

// Chunk of `chunk_len` actions with a freshly sampled style.
Tensor expert_act(const EnvSpec& env, const EnvState& state, std::size_t mode, Rng& rng,
                  std::size_t chunk_len);

}  // namespace modeflow::synthenv
