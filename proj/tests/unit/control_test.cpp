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

#include <gtest/gtest.h>

#include "modeflow/control/metrics.hpp"
#include "modeflow/policy/train.hpp"
#include "modeflow/tensorcore/error.hpp"
#include "modeflow/vqtok/vqvae.hpp"

namespace modeflow::control {
namespace {

// Planner that emits a fixed chunk every replan.
Controller constant_controller(Tensor chunk, std::size_t exec_len,
                               std::optional<std::size_t> mode = std::nullopt) {
  Controller c;
  c.name = "constant";
  c.exec_len = exec_len;
  c.start = [chunk, mode](Rng&) -> Planner {
    return [chunk, mode](const synthenv::EnvState&, Rng&) { return Plan{chunk, mode}; };
  };
  return c;
}

// ---------------------------------------------------------------- rollout

TEST(Rollout, ReplanCountWithoutEarlyStop) {
  const auto env = synthenv::fork2d();
  const auto tr = rollout(constant_controller(Tensor({16, 2}), 16, 0), env, 1, 0, 64);
  EXPECT_EQ(tr.replans.size(), 4u);
  EXPECT_EQ(tr.actions.size(), 64u);
  EXPECT_EQ(tr.positions.size(), 65u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(tr.replans[i].t, 16 * i);
  EXPECT_EQ(tr.reason, Termination::kHorizon);
}

TEST(Rollout, OpenLoopIsOneReplan) {
  const auto env = synthenv::fork2d();
  const auto tr = rollout(constant_controller(Tensor({64, 2}), 64, 0), env, 1, 0, 64);
  EXPECT_EQ(tr.replans.size(), 1u);
  EXPECT_EQ(tr.actions.size(), 64u);
}

TEST(Rollout, ExecutesFirstRowsOfEachChunk) {
  const auto env = synthenv::fork2d();
  Tensor chunk({16, 2});
  for (std::size_t k = 0; k < 16; ++k) {
    chunk.at(k, 0) = k < 8 ? 0.1 * static_cast<double>(k) - 0.4 : 50.0;  // tail never runs
    chunk.at(k, 1) = -0.2;
  }
  const auto tr = rollout(constant_controller(chunk, 8, 0), env, 2, 0, 24);
  ASSERT_EQ(tr.actions.size(), 24u);
  for (std::size_t t = 0; t < 24; ++t) {
    EXPECT_DOUBLE_EQ(tr.actions[t][0], chunk.at(t % 8, 0));
    EXPECT_DOUBLE_EQ(tr.actions[t][1], -0.2);
  }
}

TEST(Rollout, ClipsExecutedActions) {
  const auto env = synthenv::fork2d();
  Tensor chunk({16, 2});
  for (std::size_t k = 0; k < 16; ++k) chunk.at(k, 0) = 30.0;
  const auto tr = rollout(constant_controller(chunk, 8, 0), env, 3, 0, 8);
  for (const auto& a : tr.actions) EXPECT_NEAR(std::hypot(a[0], a[1]), env.action_clip, 1e-12);
}

TEST(Rollout, RejectsShortChunks) {
  const auto env = synthenv::fork2d();
  EXPECT_THROW(rollout(constant_controller(Tensor({4, 2}), 8), env, 1, 0, 64), ShapeError);
  EXPECT_THROW(rollout(constant_controller(Tensor({16, 2}), 0), env, 1, 0, 64), ValidationError);
}

TEST(Rollout, LabelerFillsMissingModes) {
  const auto env = synthenv::fork2d();
  std::size_t calls = 0;
  const Labeler lab = [&](const Tensor& chunk) {
    ++calls;
    EXPECT_EQ(chunk.rows(), 16u);
    return std::size_t{3};
  };
  const auto tr = rollout(constant_controller(Tensor({16, 2}), 16), env, 1, 0, 32, lab);
  EXPECT_EQ(calls, 2u);
  for (const auto& r : tr.replans) EXPECT_EQ(r.mode, std::optional<std::size_t>(3));
  const auto own = rollout(constant_controller(Tensor({16, 2}), 16, 1), env, 1, 0, 32, lab);
  EXPECT_EQ(calls, 2u);
  EXPECT_EQ(own.replans.front().mode, std::optional<std::size_t>(1));
}

// ------------------------------------------------------------------- jerk

std::vector<synthenv::Vec2> sample_path(double (*p)(double), double dt, std::size_t n) {
  std::vector<synthenv::Vec2> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({p(static_cast<double>(i) * dt), 0.0});
  return out;
}

TEST(TotalJerk, CubicApproachesThirtySix) {
  const double dt = 1e-3;
  const auto path = sample_path([](double t) { return t * t * t; }, dt, 1001);
  EXPECT_NEAR(total_jerk(path, dt), 36.0, 0.02 * 36.0);
}

TEST(TotalJerk, LinearIsZero) {
  // Exactly representable samples, so every difference is exact.
  std::vector<synthenv::Vec2> path;
  for (int i = 0; i < 40; ++i) path.push_back({3.0 * i * 0.125, -1.0 + 0.5 * i * 0.125});
  EXPECT_EQ(total_jerk(path, 0.125), 0.0);
}

// Integral over [0, 1] of (p''')^2 for p(t) = sum c_k t^k, from the
// coefficients alone.
double quintic_jerk_integral(const std::array<double, 6>& c) {
  // p''' = 6 c3 + 24 c4 t + 60 c5 t^2
  const double a = 6 * c[3], b = 24 * c[4], q = 60 * c[5];
  // (a + b t + q t^2)^2 = a^2 + 2ab t + (b^2 + 2aq) t^2 + 2bq t^3 + q^2 t^4
  return a * a + a * b + (b * b + 2 * a * q) / 3.0 + b * q / 2.0 + q * q / 5.0;
}

TEST(TotalJerk, QuinticAgainstSymbolicIntegral) {
  Rng rng(4);
  const double dt = 1e-3;
  for (int trial = 0; trial < 10; ++trial) {
    std::array<double, 6> cx, cy;
    for (auto& v : cx) v = rng.uniform(-2.0, 2.0);
    for (auto& v : cy) v = rng.uniform(-2.0, 2.0);
    std::vector<synthenv::Vec2> path;
    for (std::size_t i = 0; i <= 1000; ++i) {
      const double t = static_cast<double>(i) * dt;
      double x = 0, y = 0;
      for (int k = 5; k >= 0; --k) {
        x = x * t + cx[k];
        y = y * t + cy[k];
      }
      path.push_back({x, y});
    }
    const double want = quintic_jerk_integral(cx) + quintic_jerk_integral(cy);
    EXPECT_NEAR(total_jerk(path, dt), want, 0.01 * want) << "trial " << trial;
  }
}

TEST(TotalJerk, Errors) {
  const std::vector<synthenv::Vec2> three(3, {0.0, 0.0});
  EXPECT_THROW(total_jerk(three, 0.1), ValidationError);
  const std::vector<synthenv::Vec2> four(4, {0.0, 0.0});
  EXPECT_THROW(total_jerk(four, 0.0), ValidationError);
  EXPECT_EQ(total_jerk(four, 0.1), 0.0);
}

// ------------------------------------------------------------ switch rate

TEST(ModeSwitchRate, Examples) {
  const std::vector<std::size_t> constant{2, 2, 2, 2}, alternating{0, 1, 0, 1, 0}, two{0, 0, 1, 1};
  EXPECT_EQ(mode_switch_rate(constant), 0.0);
  EXPECT_EQ(mode_switch_rate(alternating), 1.0);
  EXPECT_DOUBLE_EQ(mode_switch_rate(two), 1.0 / 3.0);
}

TEST(ModeSwitchRate, NeedsTwoLabeledReplans) {
  const std::vector<std::size_t> one{1};
  EXPECT_THROW(mode_switch_rate(one), ValidationError);
  Trajectory tr;
  tr.replans = {{0, 1, Tensor()}, {8, std::nullopt, Tensor()}};
  EXPECT_THROW(mode_switch_rate(tr), ValidationError);
  tr.replans[1].mode = 0;
  EXPECT_EQ(mode_switch_rate(tr), 1.0);
}

// ---------------------------------------------------------------- evaluate

TEST(Evaluate, ExpertReplaySucceedsEverywhere) {
  for (const auto& env : {synthenv::fork2d(), synthenv::bins()}) {
    const auto ev = evaluate(expert_controller(env, 16, 8), env, {50, 9, 0, 1});
    EXPECT_EQ(ev.report.success_rate, 1.0) << env.name;
    EXPECT_EQ(ev.report.collisions, 0u);
    EXPECT_EQ(ev.report.switch_rate, 0.0);
    EXPECT_EQ(ev.report.mode_constancy, 1.0);
    EXPECT_GT(ev.report.jerk_mean, 0.0);
  }
}

TEST(Evaluate, SingleEpisodeHasZeroSpread) {
  const auto env = synthenv::fork2d();
  const auto ev = evaluate(expert_controller(env, 16, 8), env, {1, 5, 0, 1});
  EXPECT_EQ(ev.report.episodes, 1u);
  EXPECT_EQ(ev.report.jerk_std, 0.0);
  EXPECT_THROW(evaluate(expert_controller(env, 16, 8), env, {0, 5, 0, 1}), ValidationError);
}

TEST(Evaluate, ReproduciblePerSeedAndIndependentOfWorkers) {
  const auto env = synthenv::fork2d();
  const auto ctl = expert_controller(env, 16, 8);
  const auto a = evaluate(ctl, env, {24, 13, 0, 1});
  const auto b = evaluate(ctl, env, {24, 13, 0, 4});
  const auto c = evaluate(ctl, env, {24, 14, 0, 1});
  EXPECT_EQ(report_csv_row(a.report), report_csv_row(b.report));
  EXPECT_EQ(trajectories_csv(a.trajectories), trajectories_csv(b.trajectories));
  EXPECT_NE(trajectories_csv(a.trajectories), trajectories_csv(c.trajectories));
}

TEST(Evaluate, SummaryCounts) {
  std::vector<Trajectory> trajs(2);
  for (auto& t : trajs) {
    for (int i = 0; i < 5; ++i) t.positions.push_back({0.0, 0.1 * i});
    t.actions.assign(4, {0.0, 1.0});
  }
  trajs[0].success = true;
  trajs[0].reason = Termination::kSuccess;
  trajs[0].replans = {{0, 0, Tensor()}, {2, 0, Tensor()}};
  trajs[1].reason = Termination::kCollision;
  trajs[1].replans = {{0, 0, Tensor()}, {2, 1, Tensor()}, {4, 0, Tensor()}};
  const MetricReport r = summarize(trajs, "p", "fork2d", 3);
  EXPECT_EQ(r.successes, 1u);
  EXPECT_EQ(r.collisions, 1u);
  EXPECT_EQ(r.success_rate, 0.5);
  EXPECT_EQ(r.switch_pairs, 3u);
  EXPECT_EQ(r.switches, 2u);
  EXPECT_DOUBLE_EQ(r.switch_rate, 2.0 / 3.0);
  EXPECT_EQ(r.mode_constancy, 0.5);
  EXPECT_EQ(r.mean_steps, 4.0);
  EXPECT_NE(report_summary(r).find("success rate    0.500 (1/2"), std::string::npos);
  EXPECT_EQ(report_csv_header().substr(0, 15), "policy,env,seed");
}

TEST(TrajectoryCsv, RoundTrip) {
  const auto env = synthenv::bins();
  const auto ev = evaluate(expert_controller(env, 16, 8), env, {5, 21, 0, 1});
  const std::string text = trajectories_csv(ev.trajectories);
  const auto back = parse_trajectories_csv(text, env.dt);
  ASSERT_EQ(back.size(), ev.trajectories.size());
  for (std::size_t e = 0; e < back.size(); ++e) {
    const auto& a = ev.trajectories[e];
    const auto& b = back[e];
    EXPECT_EQ(a.positions, b.positions);
    EXPECT_EQ(a.actions, b.actions);
    EXPECT_EQ(a.success, b.success);
    EXPECT_EQ(a.reason, b.reason);
    ASSERT_EQ(a.replans.size(), b.replans.size());
    for (std::size_t i = 0; i < a.replans.size(); ++i) {
      EXPECT_EQ(a.replans[i].t, b.replans[i].t);
      EXPECT_EQ(a.replans[i].mode, b.replans[i].mode);
    }
    EXPECT_DOUBLE_EQ(total_jerk(a), total_jerk(b));
  }
  EXPECT_EQ(trajectories_csv(back), text);
  EXPECT_THROW(parse_trajectories_csv("episode,t\n", env.dt), FormatError);
  EXPECT_THROW(parse_trajectories_csv(text.substr(0, text.find('\n') + 1) + "0,0,x,0,0,0,1,0,success\n",
                                      env.dt),
               FormatError);
}

// ------------------------------------------------------------ trained policy

TEST(PfdagRollout, ModeConstantWithinEpisodes) {
  const auto ds = synthenv::generate_demos(synthenv::fork2d(), 200, 7, {0.5, 0.5}, 16);
  vqtok::VqConfig vc;
  vc.codes = 2;
  vc.epochs = 12;
  Rng vr(1);
  const auto tok =
      vqtok::Tokenizer::from_vq(vqtok::train_vqvae(vqtok::chunk_matrix(ds), vc, vr).model);
  policy::TrainConfig tc;
  tc.epochs = 60;
  Rng rng(3);
  const auto res = policy::train_policy(ds, {}, tok, tc, rng);
  const auto ev = evaluate(policy_controller(res.policy), ds.env, {50, 11, 0, 0},
                           tokenizer_labeler(tok, ds.stats));
  EXPECT_GE(ev.report.mode_constancy, 0.9);
  for (const auto& t : ev.trajectories) {
    for (const auto& r : t.replans) EXPECT_TRUE(r.mode.has_value());
  }
}

}  // namespace
}  // namespace modeflow::control
