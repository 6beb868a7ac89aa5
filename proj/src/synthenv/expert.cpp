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

#include "modeflow/synthenv/expert.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "modeflow/tensorcore/error.hpp"

namespace modeflow::synthenv {

namespace {

constexpr std::size_t kPathSamples = 2001;
constexpr double kForkWidth = 0.55;
constexpr double kBinsBulge = 1.5;

void check_mode(const EnvSpec& env, std::size_t mode) {
  if (mode >= env.modes) {
    throw ValidationError("mode " + std::to_string(mode) + " invalid for " + env.name + " (" +
                          std::to_string(env.modes) + " modes)");
  }
}

}  // namespace

ExpertStyle sample_style(Rng& rng) {
  ExpertStyle s;
  s.width = 1.0 + 0.1 * rng.uniform(-1.0, 1.0);
  s.speed = 1.6 * (1.0 + 0.05 * rng.uniform(-1.0, 1.0));
  return s;
}

std::vector<Vec2> mode_path(const EnvSpec& env, std::size_t mode, const ExpertStyle& style) {
  check_mode(env, mode);
  std::vector<Vec2> path(kPathSamples);
  const Vec2 a = env.start;
  for (std::size_t i = 0; i < kPathSamples; ++i) {
    const double s = static_cast<double>(i) / static_cast<double>(kPathSamples - 1);
    if (env.name == "fork2d") {
      const double side = mode == 0 ? -1.0 : 1.0;
      const Vec2 g = env.goals.front();
      const double half = 0.5 * (g[1] - a[1]);
      path[i] = {side * kForkWidth * style.width * std::sin(std::numbers::pi * s),
                 a[1] + half * (1.0 - std::cos(std::numbers::pi * s))};
    } else {
      const Vec2 g = env.goals[mode];
      const Vec2 c{kBinsBulge * style.width * g[0], 0.5 * (a[1] + g[1]) - 0.2};
      const double u = 1.0 - s;
      path[i] = {u * u * a[0] + 2 * u * s * c[0] + s * s * g[0],
                 u * u * a[1] + 2 * u * s * c[1] + s * s * g[1]};
    }
  }
  return path;
}

Tensor expert_plan(const EnvSpec& env, const EnvState& state, std::size_t mode,
                   const ExpertStyle& style, std::size_t steps) {
  check_mode(env, mode);
  Tensor plan({steps, env.action_dim});
  if (at_goal(env, state.pos)) return plan;

  const auto path = mode_path(env, mode, style);
  std::vector<double> arc(path.size(), 0.0);
  for (std::size_t i = 1; i < path.size(); ++i) {
    arc[i] = arc[i - 1] + std::hypot(path[i][0] - path[i - 1][0], path[i][1] - path[i - 1][1]);
  }
  auto dist = [&](std::size_t i, Vec2 p) { return std::hypot(path[i][0] - p[0], path[i][1] - p[1]); };

  // Progress index: global nearest point first, then a forward window.
  std::size_t idx = 0;
  for (std::size_t i = 1; i < path.size(); ++i) {
    if (dist(i, state.pos) < dist(idx, state.pos)) idx = i;
  }
  const Vec2 goal = path.back();
  EnvState s = state;
  Vec2 last{0.0, 0.0};
  for (std::size_t t = 0; t < steps; ++t) {
    if (!s.terminal()) {
      const std::size_t end = std::min(path.size(), idx + 800);
      for (std::size_t i = idx; i < end; ++i) {
        if (dist(i, s.pos) < dist(idx, s.pos)) idx = i;
      }
      const double target = arc[idx] + style.speed * env.dt;
      const auto j = static_cast<std::size_t>(
          std::lower_bound(arc.begin() + static_cast<std::ptrdiff_t>(idx), arc.end(), target) -
          arc.begin());
      const Vec2 aim = j + 1 >= path.size() ? goal : path[j];
      last = clip_action(env, {(aim[0] - s.pos[0]) / env.dt, (aim[1] - s.pos[1]) / env.dt});
      s = step(env, s, last);
    }
    plan.at(t, 0) = last[0];
    plan.at(t, 1) = last[1];
  }
  return plan;
}

Tensor expert_act(const EnvSpec& env, const EnvState& state, std::size_t mode, Rng& rng,
                  std::size_t chunk_len) {
  check_mode(env, mode);
  return expert_plan(env, state, mode, sample_style(rng), chunk_len);
}

}  // namespace modeflow::synthenv
