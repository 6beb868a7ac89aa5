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
#include <map>

#include <gtest/gtest.h>

#include "modeflow/analysis/decompose.hpp"
#include "modeflow/tensorcore/error.hpp"

namespace modeflow::analysis {
namespace {

DiscreteJoint two_point() {
  // Single observation; the mode tells the sign of a.
  return {{{0, 0, {-1.0}, 0.5}, {0, 1, {1.0}, 0.5}}};
}

// Independent oracle: raw moments E|a|^2 - |E a|^2 in long double, per slice.
Decomposition raw_moment_oracle(const DiscreteJoint& j) {
  struct Acc {
    long double p = 0, sq = 0;
    std::vector<long double> s;
  };
  std::map<std::size_t, Acc> o_acc;
  std::map<std::pair<std::size_t, std::size_t>, Acc> om_acc;
  auto push = [](Acc& a, const Atom& at) {
    if (a.s.empty()) a.s.assign(at.a.size(), 0);
    a.p += at.p;
    for (std::size_t i = 0; i < at.a.size(); ++i) {
      a.s[i] += at.p * static_cast<long double>(at.a[i]);
      a.sq += at.p * static_cast<long double>(at.a[i]) * at.a[i];
    }
  };
  for (const auto& at : j.atoms) {
    push(o_acc[at.o], at);
    push(om_acc[{at.o, at.m}], at);
  }
  auto var = [](const Acc& a) {
    long double mean_sq = 0;
    for (auto x : a.s) mean_sq += (x / a.p) * (x / a.p);
    return a.sq / a.p - mean_sq;
  };
  Decomposition d;
  long double total = 0, intra = 0, inter = 0;
  for (const auto& [o, a] : o_acc) total += a.p * var(a);
  for (const auto& [k, a] : om_acc) {
    intra += a.p * var(a);
    const Acc& ao = o_acc.at(k.first);
    long double dist = 0;
    for (std::size_t i = 0; i < a.s.size(); ++i) {
      const long double diff = a.s[i] / a.p - ao.s[i] / ao.p;
      dist += diff * diff;
    }
    inter += a.p * dist;
  }
  d.total = static_cast<double>(total);
  d.v_intra = static_cast<double>(intra);
  d.v_inter = static_cast<double>(inter);
  return d;
}

TEST(Decompose, TwoPointExample) {
  const Decomposition d = decompose(two_point());
  EXPECT_DOUBLE_EQ(d.total, 1.0);
  EXPECT_DOUBLE_EQ(d.v_intra, 0.0);
  EXPECT_DOUBLE_EQ(d.v_inter, 1.0);
}

TEST(Decompose, SingleModeHasNoInterTerm) {
  Rng rng(1);
  DiscreteJoint j = random_joint(rng, 5, 1, 7, 3);
  const Decomposition d = decompose(j);
  EXPECT_EQ(d.v_inter, 0.0);
  EXPECT_NEAR(d.total, d.v_intra, 1e-12);
}

TEST(Decompose, IdentityOnRandomJoints) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const DiscreteJoint j = random_joint(rng, 1 + rng.uniform_index(6), 4,
                                        1 + rng.uniform_index(5), 1 + rng.uniform_index(4));
    const Decomposition d = decompose(j);
    EXPECT_LT(std::abs(d.total - (d.v_intra + d.v_inter)), 1e-10) << "trial " << trial;
    const Decomposition o = raw_moment_oracle(j);
    EXPECT_NEAR(d.total, o.total, 1e-9);
    EXPECT_NEAR(d.v_intra, o.v_intra, 1e-9);
    EXPECT_NEAR(d.v_inter, o.v_inter, 1e-9);
    EXPECT_GE(d.v_intra, 0.0);
    EXPECT_GE(d.v_inter, 0.0);
  }
}

TEST(Decompose, Errors) {
  EXPECT_THROW(decompose({}), ValidationError);
  EXPECT_THROW(decompose({{{0, 0, {1.0}, 0.4}, {0, 1, {2.0}, 0.4}}}), ValidationError);
  EXPECT_THROW(decompose({{{0, 0, {1.0}, 0.5}, {0, 1, {2.0, 1.0}, 0.5}}}), ValidationError);
  // A slice present in the support with no mass has no conditional moments.
  EXPECT_THROW(decompose({{{0, 0, {1.0}, 1.0}, {0, 1, {2.0}, 0.0}}}), ValidationError);
}

TEST(MseBounds, PerfectClassifier) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const DiscreteJoint j = random_joint(rng, 1 + rng.uniform_index(5), 3, 3, 2);
    const MseBounds b = mse_bounds(j, [](std::size_t, std::size_t m) { return m; });
    EXPECT_EQ(b.e_classify, 0.0);
    EXPECT_NEAR(b.l_pfdag, b.parts.v_intra, 1e-12);
    EXPECT_NEAR(b.l_single, b.parts.total, 1e-12);
    EXPECT_LE(b.l_pfdag, b.l_single + 1e-12);
    if (b.parts.v_inter > 1e-6) EXPECT_LT(b.l_pfdag, b.l_single);
  }
}

TEST(MseBounds, AlwaysModeZeroOnSymmetricPair) {
  const MseBounds b = mse_bounds(two_point(), [](std::size_t, std::size_t) { return 0; });
  // Half the mass has true mode 1, whose mean is 2 away from mode 0's.
  EXPECT_DOUBLE_EQ(b.e_classify, 2.0);
  EXPECT_DOUBLE_EQ(b.l_pfdag, 2.0);
  EXPECT_DOUBLE_EQ(b.l_single, 1.0);
}

TEST(MseBounds, LabelFlipsAddExactlyTheClassifyTerm) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const DiscreteJoint j = random_joint(rng, 1 + rng.uniform_index(5), 4, 3, 2);
    std::map<std::size_t, std::size_t> count;
    for (const auto& at : j.atoms) count[at.o] = std::max(count[at.o], at.m + 1);
    // Deterministic flip to the next mode at every other observation.
    const MseBounds b = mse_bounds(j, [&](std::size_t o, std::size_t m) {
      return o % 2 ? (m + 1) % count.at(o) : m;
    });
    EXPECT_NEAR(b.l_pfdag - b.parts.v_intra, b.e_classify, 1e-10);
    const MseBounds f = mse_bounds_flipped(j, rng.uniform());
    EXPECT_NEAR(f.l_pfdag - f.parts.v_intra, f.e_classify, 1e-10);
  }
}

TEST(MseBounds, FlipRateIsMonotone) {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const DiscreteJoint j = random_joint(rng, 4, 3, 2, 2);
    double prev = -1.0;
    for (int k = 0; k <= 10; ++k) {
      const double e = mse_bounds_flipped(j, 0.1 * k).e_classify;
      EXPECT_GE(e, prev - 1e-12);
      prev = e;
    }
    EXPECT_EQ(mse_bounds_flipped(j, 0.0).e_classify, 0.0);
  }
}

TEST(MseBounds, AbsentModeAndBadRate) {
  EXPECT_THROW(mse_bounds(two_point(), [](std::size_t, std::size_t) { return 5; }), ValidationError);
  EXPECT_THROW(mse_bounds_flipped(two_point(), 1.5), ValidationError);
}

TEST(PredictorMse, BiasVarianceSplit) {
  Rng rng(6);
  const DiscreteJoint j = random_joint(rng, 3, 3, 4, 2);
  const Decomposition d = decompose(j);
  // The conditional mean attains the variance floor; a shift adds its square.
  std::map<std::size_t, std::vector<double>> mu;
  std::map<std::size_t, double> po;
  for (const auto& at : j.atoms) {
    auto& m = mu[at.o];
    if (m.empty()) m.assign(2, 0.0);
    for (std::size_t i = 0; i < 2; ++i) m[i] += at.p * at.a[i];
    po[at.o] += at.p;
  }
  for (auto& [o, m] : mu) {
    for (auto& x : m) x /= po[o];
  }
  EXPECT_NEAR(predictor_mse(j, [&](std::size_t o) { return mu.at(o); }), d.total, 1e-12);
  const double shifted = predictor_mse(j, [&](std::size_t o) {
    auto m = mu.at(o);
    m[0] += 0.5;
    return m;
  });
  EXPECT_NEAR(shifted, d.total + 0.25, 1e-12);
}

TEST(Empirical, MatchesEnumerationAndIsScaleInvariant) {
  Rng rng(7);
  std::vector<Sample> s;
  for (int i = 0; i < 40; ++i) {
    s.push_back({static_cast<std::size_t>(i % 2), static_cast<std::size_t>(i % 3),
                 {rng.normal(), rng.normal() + (i % 3)}});
  }
  const Decomposition d = empirical_decompose(s);
  EXPECT_LT(std::abs(d.total - (d.v_intra + d.v_inter)), 1e-12);
  auto doubled = s;
  doubled.insert(doubled.end(), s.begin(), s.end());
  const Decomposition e = empirical_decompose(doubled);
  EXPECT_NEAR(e.total, d.total, 1e-12);
  EXPECT_NEAR(e.v_intra, d.v_intra, 1e-12);
  EXPECT_NEAR(e.v_inter, d.v_inter, 1e-12);
  s.push_back({5, 0, {0.0, 0.0}});
  EXPECT_THROW(empirical_decompose(s), ValidationError);
}

TEST(Empirical, Fork2dFirstStepSeparatesModes) {
  const auto ds = synthenv::generate_demos(synthenv::fork2d(), 200, 7, {0.5, 0.5}, 16);
  const Decomposition d = empirical_decompose(step_samples(ds, 0));
  EXPECT_GT(d.v_inter, 0.1);
  EXPECT_GT(d.v_inter, 10.0 * d.v_intra);
}

TEST(Empirical, SingleModeDataHasNoInterTerm) {
  const auto ds = synthenv::generate_demos(synthenv::fork2d(), 200, 8, {1.0, 0.0}, 16);
  const auto samples = step_samples(ds, 0);
  const double bound = 3.0 / std::sqrt(static_cast<double>(samples.size()));
  EXPECT_LE(empirical_decompose(samples).v_inter, bound);
  // Tags unrelated to the data split it into two bins with nearly equal means.
  auto shuffled = samples;
  Rng rng(9);
  for (auto& s : shuffled) s.mode = rng.uniform_index(2);
  EXPECT_LE(empirical_decompose(shuffled).v_inter, bound);
}

TEST(Report, CsvAndSummary) {
  const Decomposition d = decompose(two_point());
  EXPECT_EQ(decomposition_csv_header(), "label,total,v_intra,v_inter,e_classify,residual\n");
  EXPECT_EQ(decomposition_csv_row("pair", d).substr(0, 7), "pair,1,");
  EXPECT_NE(decomposition_summary(d).find("between-mode"), std::string::npos);
}

}  // namespace
}  // namespace modeflow::analysis
