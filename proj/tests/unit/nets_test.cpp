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

#include "modeflow/nets/adamw.hpp"
#include "modeflow/nets/checkpoint.hpp"
#include "modeflow/nets/embedding.hpp"
#include "modeflow/nets/obs_encoder.hpp"
#include "modeflow/nets/schedule.hpp"
#include "modeflow/tensorcore/binary_io.hpp"
#include "modeflow/tensorcore/error.hpp"

namespace modeflow::nets {
namespace {

TEST(Sinusoidal, ZeroTime) {
  EXPECT_EQ(sinusoidal_embed(0.0, 4), Tensor::row({0, 1, 0, 1}));
}

TEST(Sinusoidal, UnitTimeDim2) {
  EXPECT_EQ(sinusoidal_embed(1.0, 2), Tensor::row({std::sin(1.0), std::cos(1.0)}));
}

TEST(Sinusoidal, MatchesDirectFormula) {
  const Tensor e = sinusoidal_embed(0.5, 8);
  for (int i = 0; i < 4; ++i) {
    const double w = std::pow(10000.0, -2.0 * i / 8.0);
    EXPECT_NEAR(e[2 * i], std::sin(w * 0.5), 1e-15);
    EXPECT_NEAR(e[2 * i + 1], std::cos(w * 0.5), 1e-15);
  }
}

TEST(Sinusoidal, OddDimRejected) {
  EXPECT_THROW(sinusoidal_embed(0.3, 5), ValidationError);
}

TEST(Mlp, RejectsBadConfig) {
  ParamStore store;
  Rng rng(1);
  EXPECT_THROW(Mlp({{4}, "gelu", true, false}, "m", store, rng), ValidationError);
  EXPECT_THROW(Mlp({{4, 0, 2}, "gelu", true, false}, "m", store, rng), ValidationError);
  EXPECT_THROW(Mlp({{4, 2}, "tanh", true, false}, "m", store, rng), ValidationError);
}

class EncoderFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    Rng rng(11);
    ObsEncoderConfig cfg;
    cfg.sensor_dim = 3;
    cfg.out_dim = 16;
    encoder_ = ObsEncoder(cfg, "enc", store_, rng);
  }

  Tensor encode(const ObsBatch& obs) {
    Graph g;
    BoundParams p(g, store_, false);
    return g.value(encoder_.forward(p, obs));
  }

  static ObsBatch single(Tensor points, std::optional<Tensor> sensor = std::nullopt) {
    ObsBatch b;
    b.point_sets.push_back(std::move(points));
    b.set_index = {0};
    b.proprio = Tensor::row({0.1, -0.2, 0.3, 0.05});
    b.sensor = std::move(sensor);
    return b;
  }

  ParamStore store_;
  ObsEncoder encoder_;
};

TEST_F(EncoderFixture, PermutationInvariantExactly) {
  Rng rng(5);
  Tensor pts = rng.normal_tensor({10, 3});
  std::vector<std::size_t> perm(10);
  for (std::size_t i = 0; i < 10; ++i) perm[i] = i;
  rng.shuffle(perm);
  Tensor shuffled({10, 3});
  for (std::size_t i = 0; i < 10; ++i) {
    for (std::size_t c = 0; c < 3; ++c) shuffled.at(i, c) = pts.at(perm[i], c);
  }
  EXPECT_EQ(encode(single(pts)), encode(single(shuffled)));
}

TEST_F(EncoderFixture, DuplicatePointsIdempotent) {
  Tensor one = Tensor::matrix(1, 3, {0.4, -0.7, 0.0});
  Tensor three = Tensor::matrix(3, 3, {0.4, -0.7, 0.0, 0.4, -0.7, 0.0, 0.4, -0.7, 0.0});
  EXPECT_EQ(encode(single(one)), encode(single(three)));
}

TEST_F(EncoderFixture, AbsentSensorEqualsZeroSensor) {
  Tensor pts = Tensor::matrix(2, 3, {1, 0, 0, 0, 1, 0});
  EXPECT_EQ(encode(single(pts)), encode(single(pts, Tensor::matrix(1, 3, {0, 0, 0}))));
  EXPECT_NE(encode(single(pts)), encode(single(pts, Tensor::matrix(1, 3, {1, 0, 0}))));
}

TEST_F(EncoderFixture, SharedSceneIndexingMatchesPerRow) {
  Rng rng(9);
  Tensor a = rng.normal_tensor({4, 3});
  Tensor b = rng.normal_tensor({4, 3});
  ObsBatch batch;
  batch.point_sets = {a, b};
  batch.set_index = {1, 0, 1};
  batch.proprio = rng.normal_tensor({3, 4});
  const Tensor joint = encode(batch);
  for (std::size_t r = 0; r < 3; ++r) {
    ObsBatch one = single(batch.set_index[r] == 0 ? a : b);
    one.proprio = Tensor::row({batch.proprio.row_span(r).begin(), batch.proprio.row_span(r).end()});
    const Tensor e = encode(one);
    for (std::size_t c = 0; c < e.size(); ++c) EXPECT_NEAR(joint.at(r, c), e[c], 1e-13);
  }
}

TEST_F(EncoderFixture, ProprioShapeChecked) {
  ObsBatch b = single(Tensor::matrix(1, 3, {0, 0, 0}));
  b.proprio = Tensor::row({1, 2});
  EXPECT_THROW(encode(b), ShapeError);
  ObsBatch empty;
  empty.set_index = {0};
  empty.proprio = Tensor::row({0, 0, 0, 0});
  EXPECT_THROW(encode(empty), ValidationError);
}

TEST(AdamW, ZeroGradNoDecayLeavesParams) {
  ParamStore s;
  s.add("p", Tensor::row({1.5, -2.0}));
  AdamW opt({0.9, 0.999, 1e-8, 0.0}, s);
  const ParamStore before = s;
  for (int i = 0; i < 5; ++i) opt.step(s, {Tensor({1, 2})}, 1e-3);
  EXPECT_EQ(s, before);
}

TEST(AdamW, ZeroGradDecoupledDecay) {
  ParamStore s;
  s.add("p", Tensor::row({1.5, -2.0}));
  AdamW opt({0.9, 0.999, 1e-8, 0.01}, s);
  opt.step(s, {Tensor({1, 2})}, 1e-4);
  EXPECT_DOUBLE_EQ(s.value(0)[0], 1.5 * (1 - 1e-6));
  EXPECT_DOUBLE_EQ(s.value(0)[1], -2.0 * (1 - 1e-6));
}

// Textbook AdamW written out per scalar, independent of the library loop.
TEST(AdamW, MatchesReferenceOnQuadratic) {
  const std::vector<double> curv{0.5, 2.0, 7.0};
  std::vector<double> ref{1.0, -3.0, 0.25};
  ParamStore s;
  s.add("p", Tensor::row(ref));
  const double lr = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8, wd = 0.01;
  AdamW opt({b1, b2, eps, wd}, s);
  std::vector<double> m(3, 0.0), v(3, 0.0);
  for (int t = 1; t <= 10; ++t) {
    Tensor g({1, 3});
    for (int i = 0; i < 3; ++i) g[i] = curv[i] * s.value(0)[i];
    opt.step(s, {g}, lr);
    for (int i = 0; i < 3; ++i) {
      const double gi = curv[i] * ref[i];
      m[i] = b1 * m[i] + (1 - b1) * gi;
      v[i] = b2 * v[i] + (1 - b2) * gi * gi;
      const double mh = m[i] / (1 - std::pow(b1, t));
      const double vh = v[i] / (1 - std::pow(b2, t));
      ref[i] = ref[i] * (1 - lr * wd) - lr * mh / (std::sqrt(vh) + eps);
    }
  }
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(s.value(0)[i], ref[i], 1e-10);
  EXPECT_EQ(opt.state().step, 10u);
}

TEST(AdamW, RejectsNonFiniteGradient) {
  ParamStore s;
  s.add("p", Tensor::row({1.0}));
  AdamW opt({}, s);
  EXPECT_THROW(opt.step(s, {Tensor::row({NAN})}, 1e-3), NonFiniteError);
  EXPECT_THROW(opt.step(s, {Tensor::row({1.0, 2.0})}, 1e-3), ShapeError);
}

TEST(Schedule, Endpoints) {
  const ScheduleConfig cfg{100, 1000, 1e-4};
  EXPECT_EQ(lr_at(0, cfg), 0.0);
  EXPECT_DOUBLE_EQ(lr_at(100, cfg), 1e-4);
  EXPECT_EQ(lr_at(1000, cfg), 0.0);
  EXPECT_NEAR(lr_at(550, cfg), 0.5e-4, 1e-18);
}

TEST(Schedule, ContinuousAtWarmupBoundary) {
  const ScheduleConfig cfg{1000, 100000, 1e-4};
  EXPECT_NEAR(lr_at(999, cfg), lr_at(1000, cfg), 1e-4 / 1000 + 1e-12);
  EXPECT_NEAR(lr_at(1001, cfg), lr_at(1000, cfg), 1e-12);
}

TEST(Schedule, RejectsOutOfRange) {
  EXPECT_THROW(lr_at(1001, {100, 1000, 1e-4}), ValidationError);
  EXPECT_THROW(lr_at(0, {1000, 1000, 1e-4}), ValidationError);
}

TEST(ModeEmbedding, RowLookup) {
  ParamStore s;
  Rng rng(3);
  ModeEmbedding emb(4, 6, "mode", s, rng);
  Graph g;
  BoundParams p(g, s, true);
  const Tensor& table = s.value(emb.table_index());
  const Tensor row0 = g.value(emb.forward(p, {0}));
  const Tensor row2 = g.value(emb.forward(p, {2}));
  for (std::size_t c = 0; c < 6; ++c) EXPECT_EQ(row0[c], table.at(0, c));
  EXPECT_NE(row0, row2);
  EXPECT_THROW(emb.forward(p, {4}), ValidationError);
}

TEST(ModeEmbedding, GradientOnlyAtLookedUpRow) {
  ParamStore s;
  Rng rng(3);
  ModeEmbedding emb(5, 3, "mode", s, rng);
  Graph g;
  BoundParams p(g, s, true);
  Var e = emb.forward(p, {3});
  Var loss = g.sum(g.mul(e, e));
  g.backward(loss);
  const Tensor grad = p.grads()[emb.table_index()];
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t c = 0; c < 3; ++c) {
      if (r == 3) {
        EXPECT_DOUBLE_EQ(grad.at(r, c), 2 * s.value(0).at(r, c));
      } else {
        EXPECT_EQ(grad.at(r, c), 0.0);
      }
    }
  }
}

TEST(Checkpoint, RoundTripAndErrors) {
  Checkpoint ck;
  ck.set_meta("kind", "test");
  ck.add("a", Tensor::matrix(2, 2, {1, 2, 3, -0.1}));
  ck.add("b", Tensor::row({1e-300}));
  const std::string bytes = ck.serialize();
  Checkpoint back = Checkpoint::parse(bytes);
  EXPECT_EQ(back.serialize(), bytes);
  EXPECT_EQ(back.meta("kind"), "test");
  EXPECT_EQ(back.get("a"), ck.get("a"));

  std::string bad_version = bytes;
  bad_version[4] = 9;
  EXPECT_THROW(Checkpoint::parse(bad_version), VersionError);
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(Checkpoint::parse(bad_magic), FormatError);
  for (std::size_t cut : {std::size_t{3}, std::size_t{10}, bytes.size() - 1}) {
    EXPECT_THROW(Checkpoint::parse(bytes.substr(0, cut)), FormatError);
  }
}

TEST(Checkpoint, ParamsRoundTripThroughFile) {
  ParamStore s;
  Rng rng(2);
  Mlp mlp({{3, 5, 2}, "gelu", true, true}, "net", s, rng);
  Checkpoint ck;
  ck.add_params("x/", s);
  const auto path = (std::filesystem::temp_directory_path() / "modeflow_nets_ck.bin").string();
  ck.save(path);
  ParamStore fresh;
  Rng other(99);
  Mlp mlp2({{3, 5, 2}, "gelu", true, true}, "net", fresh, other);
  EXPECT_NE(fresh, s);
  Checkpoint::load(path).load_params("x/", fresh);
  EXPECT_EQ(fresh, s);
  std::filesystem::remove(path);
  EXPECT_THROW(Checkpoint::load(path), MissingArtifactError);
}

}  // namespace
}  // namespace modeflow::nets
