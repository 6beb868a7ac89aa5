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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "modeflow/tensorcore/error.hpp"
#include "modeflow/tensorcore/gradcheck.hpp"
#include "modeflow/tensorcore/graph.hpp"
#include "modeflow/tensorcore/rng.hpp"

namespace modeflow {
namespace {

Tensor random(Rng& rng, Shape shape, double scale = 1.0) {
  Tensor t = rng.normal_tensor(std::move(shape));
  for (auto& v : t.data()) v *= scale;
  return t;
}

TEST(Tensor, RejectsInconsistentBuffer) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), ShapeError);
  EXPECT_THROW(Tensor(Shape{0, 3}), ShapeError);
}

TEST(Rng, MatchesReferenceStream) {
  // Frozen from an independent Python transcription of splitmix64 +
  // xoshiro256**.
  Rng zero(0);
  EXPECT_EQ(zero.next_u64(), 0x99ec5f36cb75f2b4ULL);
  EXPECT_EQ(zero.next_u64(), 0xbf6e1f784956452aULL);
  EXPECT_EQ(zero.next_u64(), 0x1a5f849d4933e6e0ULL);
  Rng r42(42);
  EXPECT_DOUBLE_EQ(r42.uniform(), 0.08386297105988216);
}

TEST(Rng, NormalMoments) {
  Rng rng(7);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Rng, StreamsDiffer) {
  EXPECT_NE(Rng::stream(1, 0).next_u64(), Rng::stream(1, 1).next_u64());
  EXPECT_EQ(Rng::stream(1, 5).next_u64(), Rng::stream(1, 5).next_u64());
}

TEST(Forward, IdentityAndSum) {
  Graph g;
  auto x = g.input(Tensor::row({1, 2, 3}));
  EXPECT_EQ(g.value(x), Tensor::row({1, 2, 3}));
  auto s = g.sum(x);
  EXPECT_EQ(g.value(s)[0], 6.0);
}

TEST(Forward, PerceptronMatchesStraightLineEvaluation) {
  Rng rng(3);
  const Tensor x = random(rng, {4, 5});
  const Tensor w1 = random(rng, {5, 7}), b1 = random(rng, {1, 7});
  const Tensor w2 = random(rng, {7, 3}), b2 = random(rng, {1, 3});
  Graph g;
  auto h = g.gelu(g.add(g.matmul(g.input(x), g.param(w1)), g.param(b1)));
  auto y = g.add(g.matmul(h, g.param(w2)), g.param(b2));

  for (std::size_t r = 0; r < 4; ++r) {
    double hidden[7];
    for (std::size_t j = 0; j < 7; ++j) {
      double acc = b1[j];
      for (std::size_t k = 0; k < 5; ++k) acc += x.at(r, k) * w1.at(k, j);
      hidden[j] = 0.5 * acc * (1.0 + std::erf(acc / std::sqrt(2.0)));
    }
    for (std::size_t j = 0; j < 3; ++j) {
      double acc = b2[j];
      for (std::size_t k = 0; k < 7; ++k) acc += hidden[k] * w2.at(k, j);
      EXPECT_NEAR(g.value(y).at(r, j), acc, 1e-12);
    }
  }
}

TEST(Forward, ShapeMismatchThrows) {
  Graph g;
  auto a = g.input(Tensor({2, 3}));
  auto b = g.input(Tensor({2, 3}));
  EXPECT_THROW(g.matmul(a, b), ShapeError);
  EXPECT_THROW(g.add(a, g.input(Tensor({3, 2}))), ShapeError);
}

TEST(Forward, NonFiniteRaisesImmediately) {
  Graph g;
  auto a = g.input(Tensor::row({1e200}));
  EXPECT_THROW(g.mul(a, a), NonFiniteError);
  EXPECT_THROW(g.input(Tensor::row({std::numeric_limits<double>::quiet_NaN()})), NonFiniteError);
}

TEST(Backward, Square) {
  Graph g;
  auto x = g.param(Tensor::scalar(3.0));
  g.backward(g.mul(x, x));
  EXPECT_DOUBLE_EQ(g.grad(x)[0], 6.0);
}

TEST(Backward, SumGivesOnes) {
  Graph g;
  auto x = g.param(Tensor::row({1, -2, 5}));
  g.backward(g.sum(x));
  EXPECT_EQ(g.grad(x), Tensor::full({1, 3}, 1.0));
}

TEST(Backward, StaleGraphIsRejected) {
  Graph g;
  auto x = g.param(Tensor::scalar(1.0));
  auto y = g.mul(x, x);
  g.set_value(x, Tensor::scalar(2.0));
  EXPECT_THROW(g.backward(y), Error);
  g.forward();
  g.backward(y);
  EXPECT_DOUBLE_EQ(g.grad(x)[0], 4.0);
}

TEST(Backward, EmptyGraphIsRejected) {
  Graph g;
  EXPECT_THROW(g.backward(Var{}), Error);
}

TEST(StopGradient, PassesValueBlocksAdjointAndTangent) {
  Graph g;
  auto x = g.param(Tensor::row({1, 2}));
  auto s = g.stop_gradient(x);
  EXPECT_EQ(g.value(s), g.value(x));
  g.backward(g.sum(s));
  EXPECT_EQ(g.grad(x), Tensor({1, 2}));
  g.jvp({{x, Tensor::row({1, 1})}});
  EXPECT_EQ(g.tangent(s), Tensor({1, 2}));
}

TEST(StopGradient, CutsOneBranchOfProduct) {
  Graph g;
  auto x = g.param(Tensor::scalar(3.0));
  g.backward(g.mul(g.stop_gradient(x), x));
  EXPECT_DOUBLE_EQ(g.grad(x)[0], 3.0);
}

TEST(Jvp, LinearMap) {
  Rng rng(11);
  const Tensor a = random(rng, {3, 4});
  const Tensor x = random(rng, {4, 1});
  const Tensor v = random(rng, {4, 1});
  Graph g;
  auto xv = g.input(x);
  auto y = g.matmul(g.input(a), xv);
  g.jvp({{xv, v}});
  const Tensor jv = g.tangent(y);
  for (std::size_t i = 0; i < 3; ++i) {
    double acc = 0;
    for (std::size_t k = 0; k < 4; ++k) acc += a.at(i, k) * v[k];
    EXPECT_NEAR(jv[i], acc, 1e-14);
  }
}

TEST(Jvp, Square) {
  Graph g;
  auto x = g.input(Tensor::scalar(2.0));
  auto y = g.mul(x, x);
  g.jvp({{x, Tensor::scalar(1.0)}});
  EXPECT_DOUBLE_EQ(g.value(y)[0], 4.0);
  EXPECT_DOUBLE_EQ(g.tangent(y)[0], 4.0);
}

TEST(Jvp, TangentShapeMismatchThrows) {
  Graph g;
  auto x = g.input(Tensor({2, 2}));
  EXPECT_THROW(g.jvp({{x, Tensor({3, 1})}}), ShapeError);
}

// A two-layer MLP with layer norm, the workhorse of every network here.
Var mlp(Graph& g, std::span<const Var> in) {
  auto h = g.add(g.matmul(in[0], in[1]), in[2]);
  h = g.gelu(g.layer_norm(h));
  return g.add(g.matmul(h, in[3]), in[4]);
}

TEST(GradCheck, RandomMlpAgreesWithFiniteDifferences) {
  Rng rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Tensor> inputs = {random(rng, {3, 4}), random(rng, {4, 6}, 0.5),
                                  random(rng, {1, 6}, 0.1), random(rng, {6, 2}, 0.5),
                                  random(rng, {1, 2}, 0.1)};
    const auto r = check_gradients(mlp, inputs, rng);
    EXPECT_LT(r.reverse_rel_error, 1e-4) << "trial " << trial;
    EXPECT_LT(r.jvp_rel_error, 1e-4) << "trial " << trial;
    EXPECT_LT(r.duality_residual, 1e-8) << "trial " << trial;
  }
}

struct OpCase {
  const char* name;
  GraphBuilder build;
  std::vector<Shape> shapes;
};

std::vector<OpCase> op_cases() {
  return {
      {"matmul", [](Graph& g, std::span<const Var> v) { return g.matmul(v[0], v[1]); }, {{3, 4}, {4, 2}}},
      {"add_row", [](Graph& g, std::span<const Var> v) { return g.add(v[0], v[1]); }, {{3, 4}, {1, 4}}},
      {"sub_scalar", [](Graph& g, std::span<const Var> v) { return g.sub(v[0], v[1]); }, {{3, 4}, {1}}},
      {"mul_col", [](Graph& g, std::span<const Var> v) { return g.mul(v[0], v[1]); }, {{3, 4}, {3, 1}}},
      {"mul_full", [](Graph& g, std::span<const Var> v) { return g.mul(v[0], v[1]); }, {{3, 4}, {3, 4}}},
      {"scale", [](Graph& g, std::span<const Var> v) { return g.scale(v[0], -1.7); }, {{2, 3}}},
      {"gelu", [](Graph& g, std::span<const Var> v) { return g.gelu(v[0]); }, {{3, 5}}},
      {"layer_norm", [](Graph& g, std::span<const Var> v) { return g.layer_norm(v[0]); }, {{3, 5}}},
      {"softmax", [](Graph& g, std::span<const Var> v) { return g.softmax(v[0]); }, {{3, 5}}},
      {"log_softmax", [](Graph& g, std::span<const Var> v) { return g.log_softmax(v[0]); }, {{3, 5}}},
      {"mean", [](Graph& g, std::span<const Var> v) { return g.mean(v[0]); }, {{3, 5}}},
      {"concat_slice",
       [](Graph& g, std::span<const Var> v) { return g.slice(g.concat({v[0], v[1]}), 1, 5); },
       {{2, 3}, {2, 4}}},
      {"gather_rows", [](Graph& g, std::span<const Var> v) { return g.gather_rows(v[0], {2, 0, 2}); }, {{4, 3}}},
      {"gather_cols", [](Graph& g, std::span<const Var> v) { return g.gather_cols(v[0], {1, 0, 3}); }, {{3, 4}}},
      {"segment_max", [](Graph& g, std::span<const Var> v) { return g.segment_max(v[0], 4); }, {{8, 3}}},
      {"sinusoidal", [](Graph& g, std::span<const Var> v) { return g.sinusoidal(v[0], 8); }, {{3, 1}}},
  };
}

TEST(GradCheck, EveryOpOverRandomInstances) {
  Rng rng(99);
  for (const auto& c : op_cases()) {
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<Tensor> inputs;
      for (const auto& s : c.shapes) inputs.push_back(random(rng, s));
      const auto r = check_gradients(c.build, inputs, rng);
      EXPECT_LT(r.reverse_rel_error, 1e-4) << c.name;
      EXPECT_LT(r.jvp_rel_error, 1e-4) << c.name;
      EXPECT_LT(r.duality_residual, 1e-8) << c.name;
    }
  }
}

TEST(GradCheck, InjectedFaultIsDetected) {
  Rng rng(5);
  testing::inject_backward_fault(OpKind::kGelu);
  std::vector<Tensor> inputs = {random(rng, {3, 5})};
  const auto r = check_gradients([](Graph& g, std::span<const Var> v) { return g.gelu(v[0]); },
                                 inputs, rng);
  testing::inject_backward_fault(std::nullopt);
  EXPECT_GT(r.reverse_rel_error, 1e-3);
  EXPECT_LT(r.jvp_rel_error, 1e-4);
}

TEST(Ops, SegmentMaxIsPermutationInvariantAndIdempotent) {
  Graph g;
  auto a = g.input(Tensor::matrix(3, 2, {1, 5, 4, 2, 3, 3}));
  auto b = g.input(Tensor::matrix(3, 2, {3, 3, 1, 5, 4, 2}));
  auto c = g.input(Tensor::matrix(3, 2, {4, 5, 4, 5, 4, 5}));
  EXPECT_EQ(g.value(g.segment_max(a, 3)), g.value(g.segment_max(b, 3)));
  EXPECT_EQ(g.value(g.segment_max(a, 3)), Tensor::matrix(1, 2, {4, 5}));
  EXPECT_EQ(g.value(g.segment_max(c, 3)), Tensor::matrix(1, 2, {4, 5}));
}

TEST(Ops, SinusoidalValues) {
  Graph g;
  auto t0 = g.input(Tensor::matrix(1, 1, {0.0}));
  EXPECT_EQ(g.value(g.sinusoidal(t0, 4)), Tensor::matrix(1, 4, {0, 1, 0, 1}));
  auto t1 = g.input(Tensor::matrix(1, 1, {1.0}));
  const auto& e = g.value(g.sinusoidal(t1, 2));
  EXPECT_DOUBLE_EQ(e[0], std::sin(1.0));
  EXPECT_DOUBLE_EQ(e[1], std::cos(1.0));
  EXPECT_THROW(g.sinusoidal(t1, 3), ShapeError);
}

TEST(Ops, GatherRejectsOutOfRange) {
  Graph g;
  auto t = g.input(Tensor({2, 3}));
  EXPECT_THROW(g.gather_rows(t, {2}), ShapeError);
}

}  // namespace
}  // namespace modeflow
