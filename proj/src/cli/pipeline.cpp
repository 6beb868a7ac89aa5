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

#include "modeflow/cli/pipeline.hpp"

#include <cstdio>

#include <Eigen/Dense>

#include "modeflow/tensorcore/error.hpp"
#include "modeflow/vqtok/kmeans.hpp"

namespace modeflow::cli {

synthenv::Dataset make_dataset(const ExperimentConfig& c) {
  validate(c);
  const auto env = env_spec(c);
  const std::vector<double> weights(env.modes, 1.0 / static_cast<double>(env.modes));
  return synthenv::generate_demos(env, c.demos, c.data_seed, weights, c.chunk_len);
}

TokenizerRun train_tokenizer(const ExperimentConfig& c, const synthenv::Dataset& ds) {
  if (ds.chunk_len != c.chunk_len) throw ShapeError("tokenizer: dataset T_p differs from config");
  Rng rng(c.vq_seed);
  const Tensor chunks = vqtok::chunk_matrix(ds);
  if (c.tokenizer == "kmeans") {
    return {vqtok::Tokenizer::from_kmeans(vqtok::kmeans(chunks, c.codes, rng).centroids), {}};
  }
  auto res = vqtok::train_vqvae(chunks, vq_config(c), rng);
  return {vqtok::Tokenizer::from_vq(std::move(res.model)), std::move(res.curve)};
}

std::string vq_curve_csv(const std::vector<vqtok::VqLossTerms>& curve) {
  std::string out = "epoch,reconstruction,codebook,commitment,total\n";
  char buf[192];
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const auto& t = curve[i];
    std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g,%.10g,%.10g\n", i, t.reconstruction, t.codebook,
                  t.commitment, t.total());
    out += buf;
  }
  return out;
}

policy::TrainResult train_bundle(const ExperimentConfig& c, const synthenv::Dataset& ds,
                                 const std::optional<vqtok::Tokenizer>& tok,
                                 const policy::EpochHook& hook) {
  const policy::PolicyConfig pc = policy_config(c);
  Rng rng(c.seed);
  return policy::train_policy(ds, pc, policy::selects_mode(pc) ? tok : std::nullopt,
                              train_config(c), rng, hook);
}

control::Evaluation evaluate_bundle(const ExperimentConfig& c, const policy::Policy& pol,
                                    const vqtok::Tokenizer* labeler_tok,
                                    const synthenv::NormStats& stats,
                                    const policy::ActOptions& options) {
  control::Controller ctl = control::policy_controller(pol, options);
  ctl.exec_len = c.exec_len;
  const control::Labeler lab =
      labeler_tok ? control::tokenizer_labeler(*labeler_tok, stats) : control::Labeler{};
  return control::evaluate(ctl, env_spec(c), {c.episodes, c.eval_seed, c.horizon, c.workers}, lab);
}

std::string pca_csv(const synthenv::Dataset& ds, const vqtok::Tokenizer& tok) {
  const Tensor chunks = vqtok::chunk_matrix(ds);
  const std::size_t n = chunks.rows(), f = chunks.cols();
  if (n < 2) throw ValidationError("pca: need at least 2 chunks");
  Eigen::MatrixXd x(n, f);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < f; ++j) x(i, j) = chunks.at(i, j);
  }
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  // Eigenvalues ascend; flip signs so the largest loading of each axis is
  // positive, which makes the projection unique.
  Eigen::MatrixXd axes(f, 2);
  for (int k = 0; k < 2; ++k) {
    Eigen::VectorXd v = eig.eigenvectors().col(static_cast<Eigen::Index>(f) - 1 - k);
    Eigen::Index arg;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    axes.col(k) = v;
  }
  const Eigen::MatrixXd proj = x * axes;
  const auto codes = tok.assign(chunks);
  const auto tags = vqtok::mode_tags(ds);
  std::string out = "pc1,pc2,mode,expert_mode\n";
  char buf[128];
  for (std::size_t i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof buf, "%.10g,%.10g,%zu,%zu\n", proj(i, 0), proj(i, 1), codes[i],
                  tags[i]);
    out += buf;
  }
  return out;
}

}  // namespace modeflow::cli
