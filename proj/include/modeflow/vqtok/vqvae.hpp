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

#include <cstdint>
#include <string>
#include <vector>

#include "modeflow/nets/checkpoint.hpp"
#include "modeflow/nets/mlp.hpp"
#include "modeflow/synthenv/dataset.hpp"
#include "modeflow/vqtok/kmeans.hpp"

namespace modeflow::vqtok {

struct VqConfig {
  std::size_t chunk_len = 16;
  std::size_t action_dim = 2;
  std::size_t codes = 64;   // K
  std::size_t latent = 64;  // D
  std::size_t hidden = 128;
  double beta = 0.25;
  std::size_t epochs = 30;
  std::size_t batch = 256;
  double lr = 1e-4;
  double weight_decay = 0.01;
  std::size_t warmup_batch = 1024;  // encoder outputs used for codebook init
  // Plain autoencoder epochs before quantization is switched on, so that the
  // codebook is initialized on informative latents.
  std::size_t ae_epochs = 5;
  double ae_lr = 1e-3;
  // Encoder output passes through a non-affine LayerNorm, which keeps
  // latents on a fixed-radius shell instead of drifting.
  bool normalize_latent = false;
  std::size_t flat() const { return chunk_len * action_dim; }
};

void validate(const VqConfig& config);

struct VqLossTerms {
  double reconstruction = 0.0;
  double codebook = 0.0;
  double commitment = 0.0;
  double beta = 0.25;
  double total() const { return reconstruction + codebook + beta * commitment; }
};

class VqModel {
 public:
  VqModel() = default;
  VqModel(const VqConfig& config, Rng& rng);

  const VqConfig& config() const { return config_; }
  const nets::ParamStore& params() const { return store_; }
  nets::ParamStore& params() { return store_; }
  const Tensor& codebook() const { return store_.value(codebook_); }
  std::size_t codebook_index() const { return codebook_; }
  const std::vector<std::uint64_t>& usage() const { return usage_; }
  std::vector<std::uint64_t>& usage() { return usage_; }
  bool is_encoder_param(std::size_t i) const;
  bool is_decoder_param(std::size_t i) const;

  // Graph pieces. x: [B, T_p*d_a] normalized chunks; z: [B, D].
  Var encoder(const nets::BoundParams& p, Var x) const;
  Var decoder(const nets::BoundParams& p, Var z) const;

  // [B, D] latents of flattened normalized chunks.
  Tensor encode(const Tensor& chunks) const;
  // [B, T_p*d_a] reconstructions of latents.
  Tensor decode(const Tensor& latents) const;
  // Codebook assignment of each flattened chunk.
  std::vector<std::size_t> assign(const Tensor& chunks) const;

  nets::Checkpoint to_checkpoint() const;
  static VqModel from_checkpoint(const nets::Checkpoint& ck);

 private:
  VqConfig config_;
  nets::ParamStore store_;
  nets::Mlp encoder_, decoder_;
  std::size_t codebook_ = 0;
  std::size_t encoder_end_ = 0;  // params [0, encoder_end_) belong to the encoder
  std::vector<std::uint64_t> usage_;
};

// argmin_k |z - e_k|, ties to the lowest index.
std::pair<std::size_t, Tensor> quantize(std::span<const double> z, const Tensor& codebook);

// Loss nodes of one minibatch, built in `p.graph()`.
struct VqLossGraph {
  Var reconstruction, codebook, commitment, total;
  Var latent, quantized, straight_through;
  std::vector<std::size_t> indices;
};
VqLossGraph vq_loss_graph(const VqModel& model, const nets::BoundParams& p, const Tensor& chunks);

VqLossTerms vq_loss(const VqModel& model, const Tensor& chunks);

// Flattened normalized chunk of every step: [N, T_p*d_a], same order as
// synthenv::all_steps.
Tensor chunk_matrix(const synthenv::Dataset& ds);
std::vector<std::size_t> mode_tags(const synthenv::Dataset& ds);

struct VqTrainResult {
  VqModel model;
  std::vector<VqLossTerms> curve;  // per-epoch means
  std::vector<std::size_t> resets;  // dead codes re-initialized per epoch
};
VqTrainResult train_vqvae(const Tensor& chunks, const VqConfig& config, Rng& rng);

double codebook_perplexity(const std::vector<std::size_t>& assignments);

// "chunk,mode" rows.
std::string assignments_csv(const std::vector<std::size_t>& assignments);

}  // namespace modeflow::vqtok
