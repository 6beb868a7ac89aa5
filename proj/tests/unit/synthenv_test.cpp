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

#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "modeflow/synthenv/dataset.hpp"
#include "modeflow/synthenv/expert.hpp"
#include "modeflow/tensorcore/binary_io.hpp"
#include "modeflow/tensorcore/error.hpp"

namespace modeflow::synthenv {
namespace {

TEST(Step, ZeroActionLeavesStateUnchanged) {
  const EnvSpec env = fork2d();
  const EnvState s = initial_state(env, 0.0, 0.0);
  EXPECT_EQ(step(env, s, {0.0, 0.0}), s);
}

TEST(Step, ReachingGoalSetsSuccess) {
  const EnvSpec env = fork2d();
  EnvState s;
  s.pos = {0.0, 1.0 - 0.11};
  EXPECT_FALSE(at_goal(env, s.pos));
  const EnvState n = step(env, s, {0.0, 0.2});
  EXPECT_TRUE(n.succeeded);
  EXPECT_FALSE(n.collided);
}

TEST(Step, LargeActionEqualsClippedAction) {
  const EnvSpec env = fork2d();
  EnvState s;
  s.pos = {0.7, 0.2};
  const Vec2 big{30.0, -40.0};
  const double k = env.action_clip / 50.0;
  const EnvState a = step(env, s, big);
  const EnvState b = step(env, s, {30.0 * k, -40.0 * k});
  EXPECT_EQ(a, b);
  EXPECT_NEAR(std::hypot(a.vel[0], a.vel[1]), env.action_clip, 1e-12);
}

TEST(Step, CollisionFreezesAndIsAbsorbing) {
  const EnvSpec env = fork2d();
  EnvState s;
  s.pos = {0.0, -0.45};
  const EnvState n = step(env, s, {0.0, 2.0});
  EXPECT_TRUE(n.collided);
  EXPECT_EQ(n.pos, s.pos);
  EXPECT_EQ(step(env, n, {0.0, -2.0}), n);
}

TEST(Step, GrazingSegmentCollides) {
  // Both endpoints lie outside the disc but the segment cuts through it.
  const EnvSpec env = fork2d();
  EnvState s;
  s.pos = {-0.1, -0.29};
  EXPECT_TRUE(step(env, s, {2.0, 0.0}).collided);
  s.pos = {-0.1, -0.31};
  EXPECT_FALSE(step(env, s, {2.0, 0.0}).collided);
}

TEST(Expert, LeftModeStaysLeft) {
  const EnvSpec env = fork2d();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    EnvState s = initial_state(env, 0.0, 0.0);
    const Tensor chunk = expert_act(env, s, 0, rng, env.horizon);
    for (std::size_t t = 0; t < chunk.rows(); ++t) {
      s = step(env, s, {chunk.at(t, 0), chunk.at(t, 1)});
      EXPECT_LE(s.pos[0], env.obstacle_center[0] + 1e-12);
    }
  }
}

TEST(Expert, HoldsAtGoal) {
  const EnvSpec env = fork2d();
  Rng rng(3);
  EnvState s;
  s.pos = env.goals.front();
  const Tensor chunk = expert_act(env, s, 1, rng, 16);
  for (double v : chunk.data()) EXPECT_EQ(v, 0.0);
}

TEST(Expert, InvalidModeRejected) {
  Rng rng(3);
  EXPECT_THROW(expert_act(fork2d(), EnvState{}, 2, rng, 16), ValidationError);
}

TEST(Expert, OpenLoopPlanSucceedsForAllSeeds) {
  for (const auto& env : {fork2d(), bins()}) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      Rng rng(seed);
      const std::size_t mode = rng.uniform_index(env.modes);
      EnvState s = initial_state(env, env.start_jitter * rng.normal(), env.start_jitter * rng.normal());
      const Tensor plan = expert_act(env, s, mode, rng, env.horizon);
      for (std::size_t t = 0; t < plan.rows(); ++t) s = step(env, s, {plan.at(t, 0), plan.at(t, 1)});
      EXPECT_TRUE(s.succeeded) << env.name << " seed " << seed;
    }
  }
}

TEST(Demos, ModeCountWithinBinomialInterval) {
  const Dataset ds = generate_demos(fork2d(), 200, 7, {0.5, 0.5}, 16);
  std::size_t left = 0;
  for (const auto& d : ds.demos) left += d.mode == 0;
  EXPECT_GE(left, 73u);
  EXPECT_LE(left, 127u);
}

TEST(Demos, SameSeedByteIdentical) {
  EXPECT_EQ(serialize_dataset(generate_demos(fork2d(), 20, 3, {0.5, 0.5}, 16)),
            serialize_dataset(generate_demos(fork2d(), 20, 3, {0.5, 0.5}, 16)));
}

TEST(Demos, DegenerateWeightsGiveOneMode) {
  const Dataset ds = generate_demos(fork2d(), 50, 1, {1.0, 0.0}, 16);
  for (const auto& d : ds.demos) EXPECT_EQ(d.mode, 0u);
  EXPECT_THROW(generate_demos(fork2d(), 5, 1, {0.7, 0.7}, 16), ValidationError);
  EXPECT_THROW(generate_demos(fork2d(), 0, 1, {0.5, 0.5}, 16), ValidationError);
}

TEST(Demos, EveryDemoReplaysToSuccess) {
  for (const auto& env : {fork2d(), bins()}) {
    std::vector<double> w(env.modes, 1.0 / static_cast<double>(env.modes));
    const Dataset ds = generate_demos(env, 60, 11, w, 16);
    for (const auto& d : ds.demos) {
      EnvState s;
      s.pos = {d.proprio.at(0, 0), d.proprio.at(0, 1)};
      for (std::size_t t = 0; t < d.length(); ++t) {
        EXPECT_FALSE(s.terminal());
        s = step(env, s, {d.actions.at(t, 0), d.actions.at(t, 1)});
      }
      EXPECT_TRUE(s.succeeded);
    }
  }
}

TEST(Demos, MeanFirstActionPointsIntoObstacle) {
  const EnvSpec env = fork2d();
  const Dataset ds = generate_demos(env, 200, 5, {0.5, 0.5}, 16);
  double ax = 0, ay = 0;
  for (const auto& d : ds.demos) {
    ax += d.actions.at(0, 0);
    ay += d.actions.at(0, 1);
  }
  ax /= 200;
  ay /= 200;
  ASSERT_GT(ay, 0.0);
  // Distance from the obstacle centre to the ray start + s * mean action.
  const double px = env.start[0] - env.obstacle_center[0], py = env.start[1] - env.obstacle_center[1];
  const double n = std::hypot(ax, ay);
  EXPECT_LT(std::abs(px * ay - py * ax) / n, env.obstacle_radius);
}

TEST(Demos, ChunkPaddingHoldsLastAction) {
  const Dataset ds = generate_demos(fork2d(), 3, 2, {0.5, 0.5}, 16);
  const auto& d = ds.demos[0];
  const std::size_t t = d.length() - 2;
  const Tensor c = ds.chunk(0, t);
  EXPECT_EQ(c.rows(), 16u);
  for (std::size_t k = 1; k < 16; ++k) {
    EXPECT_EQ(c.at(k, 0), d.actions.at(d.length() - 1, 0));
    EXPECT_EQ(c.at(k, 1), d.actions.at(d.length() - 1, 1));
  }
}

TEST(Normalization, RoundTrip) {
  const Dataset ds = generate_demos(bins(), 30, 4, {0.25, 0.25, 0.25, 0.25}, 16);
  const Tensor c = ds.chunk(3, 2);
  EXPECT_LT(max_abs_diff(denormalize_actions(ds.stats, normalize_actions(ds.stats, c)), c), 1e-12);
  const auto p = ds.demos[1].proprio.row_span(4);
  const auto back = denormalize_proprio(ds.stats, normalize_proprio(ds.stats, p));
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(back[i], p[i], 1e-12);
}

TEST(DatasetFile, RoundTripBitwise) {
  const Dataset ds = generate_demos(bins(), 10, 9, {0.1, 0.2, 0.3, 0.4}, 32);
  const auto path = (std::filesystem::temp_directory_path() / "modeflow_ds_test.bin").string();
  save_dataset(ds, path);
  const Dataset back = load_dataset(path);
  EXPECT_EQ(serialize_dataset(back), serialize_dataset(ds));
  EXPECT_EQ(back.demos, ds.demos);
  EXPECT_EQ(back.stats, ds.stats);
  std::filesystem::remove(path);
}

TEST(DatasetFile, CorruptHeaderAndTruncation) {
  const std::string bytes = serialize_dataset(generate_demos(fork2d(), 4, 1, {0.5, 0.5}, 16));
  std::string bad = bytes;
  bad[4] = 7;
  EXPECT_THROW(parse_dataset(bad), VersionError);
  EXPECT_THROW(parse_dataset(bytes.substr(0, bytes.size() - 9)), FormatError);
  EXPECT_THROW(parse_dataset(bytes.substr(0, 20)), FormatError);
}

TEST(DatasetFile, RecordCountCrossChecked) {
  const std::string bytes = serialize_dataset(generate_demos(fork2d(), 4, 1, {0.5, 0.5}, 16));
  std::string bad = bytes;
  // Trailer count is the last u64.
  bad[bad.size() - 8] = 5;
  EXPECT_THROW(parse_dataset(bad), FormatError);
}

TEST(DatasetFile, CsvHasOneRowPerStep) {
  const Dataset ds = generate_demos(fork2d(), 5, 1, {0.5, 0.5}, 16);
  const std::string csv = dataset_csv(ds);
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), ds.steps() + 1);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "demo,t,mode,x,y,vx,vy,ax,ay");
}

}  // namespace
}  // namespace modeflow::synthenv
