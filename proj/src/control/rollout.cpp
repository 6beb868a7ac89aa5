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

#include "modeflow/control/rollout.hpp"

#include "modeflow/synthenv/expert.hpp"
#include "modeflow/tensorcore/error.hpp"

namespace modeflow::control {

Controller policy_controller(const policy::Policy& policy, const policy::ActOptions& options) {
  Controller c;
  c.name = policy::kind_name(policy.kind());
  c.exec_len = policy.config().exec_len;
  c.start = [&policy, options](Rng&) -> Planner {
    return [&policy, options](const synthenv::EnvState& s, Rng& rng) {
      const auto proprio = synthenv::proprio(s);
      policy::Action a = policy::act(policy, proprio, rng, options);
      return Plan{std::move(a.chunk), a.mode};
    };
  };
  return c;
}

Controller expert_controller(const synthenv::EnvSpec& env, std::size_t chunk_len,
                             std::size_t exec_len) {
  if (env.modes == 0) throw ValidationError("expert controller: environment has no modes");
  Controller c;
  c.name = "expert";
  c.exec_len = exec_len;
  c.start = [env, chunk_len](Rng& rng) -> Planner {
    const std::size_t mode = rng.uniform_index(env.modes);
    const synthenv::ExpertStyle style = synthenv::sample_style(rng);
    return [env, chunk_len, mode, style](const synthenv::EnvState& s, Rng&) {
      return Plan{synthenv::expert_plan(env, s, mode, style, chunk_len), mode};
    };
  };
  return c;
}

std::string termination_name(Termination t) {
  switch (t) {
    case Termination::kSuccess: return "success";
    case Termination::kCollision: return "collision";
    case Termination::kHorizon: return "horizon";
  }
  return "?";
}

Labeler tokenizer_labeler(const vqtok::Tokenizer& tokenizer, const synthenv::NormStats& stats) {
  return [&tokenizer, &stats](const Tensor& chunk) {
    const Tensor n = synthenv::normalize_actions(stats, chunk);
    return tokenizer.assign(n.reshaped({1, n.size()})).front();
  };
}

Trajectory rollout(const Controller& controller, const synthenv::EnvSpec& env, std::uint64_t seed,
                   std::uint64_t index, std::size_t horizon, const Labeler& labeler) {
  if (controller.exec_len == 0) throw ValidationError("rollout: T_a must be positive");
  if (horizon == 0) throw ValidationError("rollout: horizon must be positive");
  Rng rng = Rng::stream(seed, index);
  const double jx = env.start_jitter * rng.normal();
  const double jy = env.start_jitter * rng.normal();
  synthenv::EnvState state = synthenv::initial_state(env, jx, jy);
  const Planner plan = controller.start(rng);

  Trajectory traj;
  traj.dt = env.dt;
  traj.positions.push_back(state.pos);
  std::size_t t = 0;
  while (t < horizon && !state.terminal()) {
    const std::size_t t0 = t;
    Plan p = plan(state, rng);
    if (p.chunk.rows() < controller.exec_len || p.chunk.cols() != env.action_dim) {
      throw ShapeError("rollout: chunk " + shape_string(p.chunk.shape()) + " shorter than T_a");
    }
    if (!p.mode && labeler) p.mode = labeler(p.chunk);
    for (std::size_t k = 0; k < controller.exec_len && t < horizon && !state.terminal(); ++k) {
      const synthenv::Vec2 u =
          synthenv::clip_action(env, {p.chunk.at(k, 0), p.chunk.at(k, 1)});
      state = synthenv::step(env, state, u);
      traj.actions.push_back(u);
      traj.positions.push_back(state.pos);
      ++t;
    }
    traj.replans.push_back({t0, p.mode, std::move(p.chunk)});
  }
  traj.success = state.succeeded;
  traj.reason = state.succeeded   ? Termination::kSuccess
                : state.collided ? Termination::kCollision
                                 : Termination::kHorizon;
  return traj;
}

}  // namespace modeflow::control
