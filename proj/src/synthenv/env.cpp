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

#include "modeflow/synthenv/env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "modeflow/tensorcore/error.hpp"

namespace modeflow::synthenv {

EnvSpec fork2d() {
  EnvSpec e;
  e.name = "fork2d";
  e.has_obstacle = true;
  e.obstacle_radius = 0.3;
  e.goals = {{0.0, 1.0}};
  e.modes = 2;
  e.point_count = 65;
  return e;
}

EnvSpec bins() {
  EnvSpec e;
  e.name = "bins";
  e.goals = {{-0.9, 0.8}, {-0.3, 0.8}, {0.3, 0.8}, {0.9, 0.8}};
  e.modes = 4;
  e.point_count = 64;
  return e;
}

EnvSpec make_env(const std::string& name) {
  if (name == "fork2d") return fork2d();
  if (name == "bins") return bins();
  throw ValidationError("unknown environment '" + name + "' (expected fork2d or bins)");
}

EnvState initial_state(const EnvSpec& env, double jitter_x, double jitter_y) {
  EnvState s;
  s.pos = {env.start[0] + jitter_x, env.start[1] + jitter_y};
  return s;
}

Vec2 clip_action(const EnvSpec& env, Vec2 a) {
  const double n = std::hypot(a[0], a[1]);
  if (n > env.action_clip) {
    const double k = env.action_clip / n;
    a = {a[0] * k, a[1] * k};
  }
  return a;
}

bool at_goal(const EnvSpec& env, Vec2 pos) {
  for (const auto& g : env.goals) {
    if (std::hypot(pos[0] - g[0], pos[1] - g[1]) <= env.success_radius) return true;
  }
  return false;
}

namespace {

// Minimum distance from c to the segment [p, q].
double segment_distance(Vec2 p, Vec2 q, Vec2 c) {
  const double dx = q[0] - p[0], dy = q[1] - p[1];
  const double len2 = dx * dx + dy * dy;
  double t = 0.0;
  if (len2 > 0) t = std::clamp(((c[0] - p[0]) * dx + (c[1] - p[1]) * dy) / len2, 0.0, 1.0);
  return std::hypot(p[0] + t * dx - c[0], p[1] + t * dy - c[1]);
}

}  // namespace

EnvState step(const EnvSpec& env, const EnvState& state, Vec2 action) {
  if (state.terminal()) return state;
  if (!std::isfinite(action[0]) || !std::isfinite(action[1])) {
    throw NonFiniteError("env step: non-finite action");
  }
  const Vec2 u = clip_action(env, action);
  const Vec2 next{state.pos[0] + env.dt * u[0], state.pos[1] + env.dt * u[1]};
  EnvState out = state;
  if (env.has_obstacle && segment_distance(state.pos, next, env.obstacle_center) < env.obstacle_radius) {
    out.collided = true;
    return out;
  }
  out.pos = next;
  out.vel = u;
  // Success is swept like collision: the goal disc counts as reached if the
  // straight motion of this step passes through it.
  for (const auto& g : env.goals) {
    if (segment_distance(state.pos, next, g) <= env.success_radius) out.succeeded = true;
  }
  return out;
}

Tensor scene_points(const EnvSpec& env) {
  Tensor pts({env.point_count, 3});
  std::size_t row = 0;
  auto ring = [&](Vec2 c, double r, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
      pts.at(row, 0) = c[0] + r * std::cos(a);
      pts.at(row, 1) = c[1] + r * std::sin(a);
      ++row;
    }
  };
  if (env.has_obstacle) {
    ring(env.obstacle_center, env.obstacle_radius, 64);
    for (const auto& g : env.goals) {
      pts.at(row, 0) = g[0];
      pts.at(row, 1) = g[1];
      ++row;
    }
  } else {
    const std::size_t per = env.point_count / env.goals.size();
    for (const auto& g : env.goals) ring(g, env.success_radius, per);
  }
  if (row != env.point_count) throw ValidationError("scene point count mismatch for " + env.name);
  return pts;
}

std::vector<double> proprio(const EnvState& s) { return {s.pos[0], s.pos[1], s.vel[0], s.vel[1]}; }

}  // namespace modeflow::synthenv
