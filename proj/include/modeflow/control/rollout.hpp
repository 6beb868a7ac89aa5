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
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "modeflow/policy/policy.hpp"
#include "modeflow/synthenv/env.hpp"
#include "modeflow/tensorcore/rng.hpp"

namespace modeflow::control {

// A chunk proposed at one replanning step.
struct Plan {
  Tensor chunk;                     // [T_p, d_a], environment units
  std::optional<std::size_t> mode;  // mode selected by the planner, if any
};

using Planner = std::function<Plan(const synthenv::EnvState& state, Rng& rng)>;

// Receding-horizon controller: `start` is called once per episode and
// returns the planner used for that episode, so per-episode choices (an
// expert's mode, say) live in the closure.
struct Controller {
  std::string name;
  std::size_t exec_len = 8;  // T_a
  std::function<Planner(Rng& rng)> start;
};

Controller policy_controller(const policy::Policy& policy, const policy::ActOptions& options = {});

// Scripted expert that draws a mode and a style per episode and replans with
// pure pursuit. Modes are drawn uniformly.
Controller expert_controller(const synthenv::EnvSpec& env, std::size_t chunk_len,
                             std::size_t exec_len);

struct Replan {
  std::size_t t = 0;
  std::optional<std::size_t> mode;  // planner mode, else a pseudo-mode label
  Tensor chunk;
};

enum class Termination { kSuccess, kCollision, kHorizon };
std::string termination_name(Termination t);

struct Trajectory {
  std::vector<synthenv::Vec2> positions;  // L + 1 samples, start included
  std::vector<synthenv::Vec2> actions;    // L executed (clipped) commands
  std::vector<Replan> replans;
  double dt = 0.1;
  bool success = false;
  Termination reason = Termination::kHorizon;
};

// Assigns a pseudo-mode to a chunk that came without one.
using Labeler = std::function<std::size_t(const Tensor& chunk)>;

// Labels chunks by nearest codebook entry of the tokenizer after
// normalizing with `stats`.
Labeler tokenizer_labeler(const vqtok::Tokenizer& tokenizer, const synthenv::NormStats& stats);

// Episode `index` of a run with `seed`: the start jitter and every planner
// draw use Rng::stream(seed, index). Executes the first T_a actions of each
// chunk, then replans, until success, collision or `horizon` steps.
Trajectory rollout(const Controller& controller, const synthenv::EnvSpec& env, std::uint64_t seed,
                   std::uint64_t index, std::size_t horizon, const Labeler& labeler = {});

}  // namespace modeflow::control
