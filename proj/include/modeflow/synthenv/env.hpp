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

#include <array>
#include <string>
#include <vector>

#include "modeflow/tensorcore/tensor.hpp"

namespace modeflow::synthenv {

using Vec2 = std::array<double, 2>;

// Point mass in the plane driven by a clipped velocity command. The state
// vector is (x, y, vx, vy), where the velocity is the last applied command.
struct EnvSpec {
  std::string name;
  std::size_t state_dim = 4;
  std::size_t action_dim = 2;
  std::size_t horizon = 64;
  double dt = 0.1;
  double success_radius = 0.1;
  double action_clip = 2.0;  // bound on the command norm
  Vec2 start{0.0, -1.0};
  double start_jitter = 0.01;  // std of the start position noise
  bool has_obstacle = false;
  Vec2 obstacle_center{0.0, 0.0};
  double obstacle_radius = 0.0;
  std::vector<Vec2> goals;  // reaching any goal counts as success
  std::size_t modes = 0;    // number of expert modes
  std::size_t point_count = 0;
};

EnvSpec fork2d();
EnvSpec bins();
// "fork2d" or "bins"; ValidationError otherwise.
EnvSpec make_env(const std::string& name);

struct EnvState {
  Vec2 pos{};
  Vec2 vel{};
  bool collided = false;
  bool succeeded = false;
  bool terminal() const { return collided || succeeded; }
  friend bool operator==(const EnvState&, const EnvState&) = default;
};

EnvState initial_state(const EnvSpec& env, double jitter_x, double jitter_y);

Vec2 clip_action(const EnvSpec& env, Vec2 action);

// Terminal states are absorbing. A move whose segment enters the obstacle
// leaves the position where it was and sets the collision flag.
EnvState step(const EnvSpec& env, const EnvState& state, Vec2 action);

bool at_goal(const EnvSpec& env, Vec2 pos);

// Scene geometry sampled as z = 0 points: [point_count, 3].
Tensor scene_points(const EnvSpec& env);

std::vector<double> proprio(const EnvState& state);

}  // namespace modeflow::synthenv
