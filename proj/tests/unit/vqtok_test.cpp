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
#include <limits>

#include <gtest/gtest.h>

#include "modeflow/tensorcore/error.hpp"
#include "modeflow/vqtok/vqvae.hpp"

namespace modeflow::vqtok {
namespace {

using nets::BoundParams;

std::size_t brute_force_nearest(const Tensor& table, const std::vector<double>& z) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < table.rows(); ++k) {
    double d = 0;
    for (std::size_t j = 0; j < z.size(); ++j) d += (table.at(k, j) - z[j]) * (table.at(k, j) - z[j]);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

TEST(Quantize, SmallExample) {
  const Tensor cb = Tensor::matrix(2, 2, {0, 0, 1, 1});
  const std::vector<double> z{0.9, 0.8};
  EXPECT_EQ(quantize(z, cb).first, 1u);
  EXPECT_EQ(quantize(z, cb).second, Tensor::row({1, 1}));
}

TEST(Quantize, SingleEntryAlwaysZero) {
  Rng rng(1);
  const Tensor cb = rng.normal_tensor({1, 3});
  for (int i = 0; i < 10; ++i) {
    const Tensor z = rng.normal_tensor({3});
    EXPECT_EQ(quantize(z.data(), cb).first, 0u);
  }
}

TEST(Quantize, TieGoesToLowestIndex) {
  Tensor cb = Tensor::matrix(6, 2, {5, 5, 6, 6, 1, 0, 7, 7, 8, 8, -1, 0});
  const std::vector<double> z{0.0, 0.0};
  EXPECT_EQ(quantize(z, cb).first, 2u);
}

TEST(Quantize, MatchesExhaustiveSearch) {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 1 + rng.uniform_index(20), d = 1 + rng.uniform_index(6);
    const Tensor cb = rng.normal_tensor({k, d});
    const Tensor z = rng.normal_tensor({d});
    EXPECT_EQ(quantize(z.data(), cb).first, brute_force_nearest(cb, z.vec()));
  }
}

TEST(Quantize, ErrorsOnEmptyOrMismatch) {
  EXPECT_THROW(nearest_row(Tensor(), std::vector<double>{1.0}), ValidationError);
  EXPECT_THROW(quantize(std::vector<double>{1.0}, Tensor::matrix(1, 2, {0, 0})), ShapeError);
}

VqConfig tiny_config() {
  VqConfig c;
  c.chunk_len = 4;
  c.action_dim = 2;
  c.codes = 3;
  c.latent = 5;
  c.hidden = 8;
  return c;
}

TEST(VqModel, EncodeDeterministicAndShapeChecked) {
  Rng rng(3);
  VqModel m(tiny_config(), rng);
  const Tensor x = rng.normal_tensor({2, 8});
  EXPECT_EQ(m.encode(x), m.encode(x));
  EXPECT_EQ(m.encode(x).cols(), 5u);
  EXPECT_THROW(m.encode(rng.normal_tensor({2, 7})), ShapeError);
  EXPECT_THROW(m.decode(rng.normal_tensor({1, 4})), ShapeError);
  const Tensor z = rng.normal_tensor({1, 5});
  EXPECT_EQ(m.decode(z), m.decode(z));
}

TEST(VqLoss, ZeroWhenPerfect) {
  // Constant encoder output b equal to codebook row 0, constant decoder
  // output equal to the data: every term vanishes.
  Rng rng(4);
  VqModel m(tiny_config(), rng);
  auto& s = m.params();
  const Tensor b = rng.normal_tensor({1, 5});
  const Tensor x = rng.normal_tensor({1, 8});
  s.value(*s.find("vq/encoder/l2/w")) = Tensor({8, 5});
  s.value(*s.find("vq/encoder/l2/b")) = b;
  s.value(*s.find("vq/decoder/l2/w")) = Tensor({8, 8});
  s.value(*s.find("vq/decoder/l2/b")) = x;
  std::copy(b.vec().begin(), b.vec().end(), s.value(m.codebook_index()).row_span(0).begin());
  const VqLossTerms t = vq_loss(m, x);
  EXPECT_EQ(t.reconstruction, 0.0);
  EXPECT_EQ(t.codebook, 0.0);
  EXPECT_EQ(t.commitment, 0.0);
  EXPECT_EQ(t.total(), 0.0);
}

TEST(VqLoss, DefaultBeta) { EXPECT_EQ(VqConfig{}.beta, 0.25); }

TEST(VqLoss, TotalMatchesStoredTerms) {
  Rng rng(5);
  VqModel m(tiny_config(), rng);
  const Tensor x = rng.normal_tensor({6, 8});
  Graph g;
  BoundParams p(g, m.params(), true);
  const auto l = vq_loss_graph(m, p, x);
  const VqLossTerms t{g.value(l.reconstruction)[0], g.value(l.codebook)[0],
                      g.value(l.commitment)[0], m.config().beta};
  EXPECT_NEAR(t.total(), g.value(l.total)[0], 1e-12);
  EXPECT_GT(t.reconstruction, 0.0);
  EXPECT_GT(t.codebook, 0.0);
  EXPECT_GT(t.commitment, 0.0);
}

class Routing : public ::testing::Test {
 protected:
  std::vector<Tensor> grads_of(Var (*pick)(const VqLossGraph&)) {
    Rng rng(6);
    model_ = VqModel(tiny_config(), rng);
    const Tensor x = rng.normal_tensor({5, 8});
    Graph g;
    BoundParams p(g, model_.params(), true);
    const auto l = vq_loss_graph(model_, p, x);
    g.backward(pick(l));
    return p.grads();
  }
  static double norm(const Tensor& t) {
    double s = 0;
    for (double v : t.data()) s += v * v;
    return s;
  }
  VqModel model_;
};

TEST_F(Routing, CodebookTermReachesOnlyCodebook) {
  const auto g = grads_of([](const VqLossGraph& l) { return l.codebook; });
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (i == model_.codebook_index()) {
      EXPECT_GT(norm(g[i]), 0.0);
    } else {
      EXPECT_EQ(norm(g[i]), 0.0) << model_.params().name(i);
    }
  }
}

TEST_F(Routing, CommitmentTermReachesOnlyEncoder) {
  const auto g = grads_of([](const VqLossGraph& l) { return l.commitment; });
  bool any = false;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (model_.is_encoder_param(i)) {
      any |= norm(g[i]) > 0;
    } else {
      EXPECT_EQ(norm(g[i]), 0.0) << model_.params().name(i);
    }
  }
  EXPECT_TRUE(any);
}

TEST_F(Routing, ReconstructionReachesDecoderAndEncoderNotCodebook) {
  const auto g = grads_of([](const VqLossGraph& l) { return l.reconstruction; });
  bool enc = false, dec = false;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (model_.is_encoder_param(i)) enc |= norm(g[i]) > 0;
    if (model_.is_decoder_param(i)) dec |= norm(g[i]) > 0;
  }
  EXPECT_TRUE(enc);
  EXPECT_TRUE(dec);
  EXPECT_EQ(norm(g[model_.codebook_index()]), 0.0);
}

// Straight-through: the encoder receives exactly the decoder-input gradient
// evaluated at the quantized latent.
TEST(StraightThrough, EncoderGradientEqualsDecoderInputGradient) {
  Rng rng(7);
  VqModel m(tiny_config(), rng);
  const Tensor x = rng.normal_tensor({4, 8});

  Graph g1;
  BoundParams p1(g1, m.params(), true);
  const auto l = vq_loss_graph(m, p1, x);
  g1.backward(l.reconstruction);
  const auto direct = p1.grads();

  Graph g2;
  BoundParams p2(g2, m.params(), false);
  Var zq = g2.param(g1.value(l.quantized));
  Var err = g2.sub(g2.input(x), m.decoder(p2, zq));
  g2.backward(g2.scale(g2.sum(g2.mul(err, err)), 1.0 / static_cast<double>(x.rows())));
  const Tensor dz = g2.grad(zq);

  Graph g3;
  BoundParams p3(g3, m.params(), true);
  g3.backward(m.encoder(p3, g3.input(x)), dz);
  const auto chained = p3.grads();
  for (std::size_t i = 0; i < direct.size(); ++i) {
    if (!m.is_encoder_param(i)) continue;
    EXPECT_LT(max_abs_diff(direct[i], chained[i]), 1e-14) << m.params().name(i);
  }
}

TEST(Perplexity, Cases) {
  EXPECT_DOUBLE_EQ(codebook_perplexity({3, 3, 3, 3}), 1.0);
  std::vector<std::size_t> uniform;
  for (std::size_t k = 0; k < 64; ++k) uniform.push_back(k);
  EXPECT_NEAR(codebook_perplexity(uniform), 64.0, 1e-10);
  EXPECT_NEAR(codebook_perplexity({0, 1, 0, 1}), 2.0, 1e-12);
  EXPECT_THROW(codebook_perplexity({}), ValidationError);
}

TEST(KMeans, KEqualsNGivesZeroError) {
  Rng rng(8);
  const Tensor x = rng.normal_tensor({12, 3});
  Rng krng(1);
  const auto r = kmeans(x, 12, krng);
  EXPECT_EQ(r.objective.back(), 0.0);
}

TEST(KMeans, SingleClusterIsMean) {
  Rng rng(9);
  const Tensor x = rng.normal_tensor({50, 4});
  Rng krng(1);
  const auto r = kmeans(x, 1, krng);
  for (std::size_t j = 0; j < 4; ++j) {
    double m = 0;
    for (std::size_t i = 0; i < 50; ++i) m += x.at(i, j);
    EXPECT_NEAR(r.centroids.at(0, j), m / 50, 1e-14);
  }
}

TEST(KMeans, ObjectiveNonIncreasing) {
  Rng rng(10);
  const Tensor x = rng.normal_tensor({300, 5});
  for (std::uint64_t s = 0; s < 5; ++s) {
    Rng krng(s);
    const auto r = kmeans(x, 7, krng, 200);
    for (std::size_t i = 1; i < r.objective.size(); ++i) {
      EXPECT_LE(r.objective[i], r.objective[i - 1] * (1 + 1e-15));
    }
  }
}

TEST(KMeans, RejectsTooManyClusters) {
  Rng rng(1);
  EXPECT_THROW(kmeans(Tensor::matrix(2, 1, {0, 1}), 3, rng), ValidationError);
}

TEST(Checkpoint, VqRoundTrip) {
  Rng rng(11);
  VqModel m(tiny_config(), rng);
  m.usage()[1] = 17;
  const std::string bytes = m.to_checkpoint().serialize();
  const VqModel back = VqModel::from_checkpoint(nets::Checkpoint::parse(bytes));
  EXPECT_EQ(back.params(), m.params());
  EXPECT_EQ(back.usage(), m.usage());
  EXPECT_EQ(back.to_checkpoint().serialize(), bytes);
  nets::Checkpoint other;
  other.set_meta("kind", "bundle");
  EXPECT_THROW(VqModel::from_checkpoint(other), FormatError);
}

class ForkTraining : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const auto ds = synthenv::generate_demos(synthenv::fork2d(), 200, 7, {0.5, 0.5}, 16);
    chunks_ = new Tensor(chunk_matrix(ds));
    tags_ = new std::vector<std::size_t>(mode_tags(ds));
    VqConfig c;
    c.codes = 2;
    c.epochs = 12;
    Rng rng(1);
    result_ = new VqTrainResult(train_vqvae(*chunks_, c, rng));
    c.codes = 64;
    Rng rng64(1);
    result64_ = new VqTrainResult(train_vqvae(*chunks_, c, rng64));
  }
  static void TearDownTestSuite() {
    delete chunks_;
    delete tags_;
    delete result_;
    delete result64_;
  }
  static Tensor* chunks_;
  static std::vector<std::size_t>* tags_;
  static VqTrainResult* result_;
  static VqTrainResult* result64_;
};
Tensor* ForkTraining::chunks_ = nullptr;
std::vector<std::size_t>* ForkTraining::tags_ = nullptr;
VqTrainResult* ForkTraining::result_ = nullptr;
VqTrainResult* ForkTraining::result64_ = nullptr;

TEST_F(ForkTraining, ReconstructionDecreasesOverFirstTenEpochs) {
  const auto& c = result64_->curve;
  ASSERT_GE(c.size(), 10u);
  std::vector<double> smooth;
  for (std::size_t e = 0; e + 2 < 10; ++e) {
    smooth.push_back((c[e].reconstruction + c[e + 1].reconstruction + c[e + 2].reconstruction) / 3);
  }
  for (std::size_t i = 1; i < smooth.size(); ++i) EXPECT_LT(smooth[i], smooth[i - 1]);
}

TEST_F(ForkTraining, TwoCodesAlignWithExpertModes) {
  const auto a = result_->model.assign(*chunks_);
  std::size_t counts[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t i = 0; i < a.size(); ++i) ++counts[a[i]][(*tags_)[i]];
  for (std::size_t k = 0; k < 2; ++k) {
    const std::size_t used = counts[k][0] + counts[k][1];
    ASSERT_GT(used, 0u);
    EXPECT_GE(static_cast<double>(std::max(counts[k][0], counts[k][1])) / used, 0.95);
  }
  EXPECT_NE(counts[0][0] > counts[0][1], counts[1][0] > counts[1][1]);
  const double ppl = codebook_perplexity(a);
  EXPECT_GE(ppl, 1.9);
  EXPECT_LE(ppl, 2.0);
}

TEST_F(ForkTraining, LatentGapExceedsWithinModeSpread) {
  const Tensor z = result_->model.encode(*chunks_);
  const std::size_t d = z.cols();
  std::vector<double> mean[2] = {std::vector<double>(d, 0), std::vector<double>(d, 0)};
  double cnt[2] = {0, 0};
  for (std::size_t i = 0; i < z.rows(); ++i) {
    for (std::size_t j = 0; j < d; ++j) mean[(*tags_)[i]][j] += z.at(i, j);
    ++cnt[(*tags_)[i]];
  }
  for (int m = 0; m < 2; ++m) for (auto& v : mean[m]) v /= cnt[m];
  double spread = 0, gap = 0;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    double s = 0;
    for (std::size_t j = 0; j < d; ++j) s += std::pow(z.at(i, j) - mean[(*tags_)[i]][j], 2);
    spread += s / z.rows();
  }
  for (std::size_t j = 0; j < d; ++j) gap += std::pow(mean[0][j] - mean[1][j], 2);
  EXPECT_GT(std::sqrt(gap), std::sqrt(spread));
}

TEST_F(ForkTraining, SameSeedSameFinalLoss) {
  VqConfig c;
  c.codes = 2;
  c.epochs = 2;
  Rng a(3), b(3);
  const auto ra = train_vqvae(*chunks_, c, a);
  const auto rb = train_vqvae(*chunks_, c, b);
  EXPECT_EQ(ra.curve.back().total(), rb.curve.back().total());
  EXPECT_EQ(ra.model.to_checkpoint().serialize(), rb.model.to_checkpoint().serialize());
}

}  // namespace
}  // namespace modeflow::vqtok
