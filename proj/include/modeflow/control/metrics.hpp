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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "modeflow/control/rollout.hpp"

namespace modeflow::control {

// Integral of |d^3 p / dt^3|^2 over the sampled path. Third differences are
// central inside and one-sided at both ends; needs at least 4 samples.
double total_jerk(std::span<const synthenv::Vec2> positions, double dt);
double total_jerk(const Trajectory& traj);

// Fraction of consecutive replans whose modes differ. Every replan must
// carry a mode and there must be at least two.
double mode_switch_rate(const Trajectory& traj);
double mode_switch_rate(std::span<const std::size_t> modes);

struct MetricReport {
  std::string policy, env;
  std::uint64_t seed = 0;
  std::size_t episodes = 0;
  std::size_t successes = 0;
  std::size_t collisions = 0;
  double success_rate = 0.0;
  double jerk_mean = 0.0;
  double jerk_std = 0.0;        // zero for a single episode
  std::size_t switch_pairs = 0;
  std::size_t switches = 0;
  double switch_rate = 0.0;     // pooled over episodes
  double mode_constancy = 0.0;  // episodes whose replans share one mode
  double mean_steps = 0.0;
};

// Pure aggregation over finished trajectories, in the given order.
MetricReport summarize(const std::vector<Trajectory>& trajs, const std::string& policy,
                       const std::string& env, std::uint64_t seed);

struct EvalConfig {
  std::size_t episodes = 20;
  std::uint64_t seed = 0;
  std::size_t horizon = 0;  // 0 uses the environment horizon
  std::size_t workers = 0;  // 0 uses the hardware concurrency
};

struct Evaluation {
  MetricReport report;
  std::vector<Trajectory> trajectories;  // by episode index
};

// Episodes fan out over worker threads; episode i always uses stream i, so
// the result does not depend on the number of workers.
Evaluation evaluate(const Controller& controller, const synthenv::EnvSpec& env,
                    const EvalConfig& config, const Labeler& labeler = {});

// Teacher-forced chunk error on dataset states, per element in normalized
// units. Each true chunk's mode is its tokenizer code; `prototype` scores
// the decoded prototype alone, `policy` adds one sampled residual. Uses the
// first `max_samples` steps (0 for all).
struct TrackingError {
  double prototype = 0.0;
  double policy = 0.0;
  std::size_t samples = 0;
};
TrackingError chunk_tracking_error(const policy::Policy& pfdag, const synthenv::Dataset& ds,
                                   std::size_t max_samples, Rng& rng);

std::string report_csv_header();
std::string report_csv_row(const MetricReport& r);
std::string report_summary(const MetricReport& r);

// One row per position sample: episode,t,x,y,ax,ay,replan,mode,outcome.
// mode is -1 when absent; the final row of an episode carries no action.
std::string trajectories_csv(const std::vector<Trajectory>& trajs);
std::vector<Trajectory> parse_trajectories_csv(const std::string& text, double dt);

}  // namespace modeflow::control
