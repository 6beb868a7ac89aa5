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

#include "modeflow/vqtok/vqvae.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "modeflow/nets/adamw.hpp"
#include "modeflow/nets/schedule.hpp"
#include "modeflow/tensorcore/error.hpp"

namespace modeflow::vqtok {

using nets::BoundParams;

void validate(const VqConfig& c) {
  if (c.chunk_len == 0 || c.action_dim == 0) throw ValidationError("vq: empty chunk shape");
  if (c.codes == 0) throw ValidationError("vq: codebook size K must be >= 1");
  if (c.latent == 0 || c.hidden == 0) throw ValidationError("vq: widths must be positive");
  if (!(c.beta >= 0)) throw ValidationError("vq: beta must be >= 0");
  if (c.epochs == 0 || c.batch == 0) throw ValidationError("vq: epochs and batch must be positive");
  if (!(c.lr > 0) || !(c.ae_lr > 0)) throw ValidationError("vq: learning rates must be positive");
}

VqModel::VqModel(const VqConfig& config, Rng& rng) : config_(config) {
  validate(config_);
  encoder_ = nets::Mlp({{config.flat(), config.hidden, config.hidden, config.latent}, "gelu", true,
                        false},
                       "vq/encoder", store_, rng);
  encoder_end_ = store_.size();
  decoder_ = nets::Mlp({{config.latent, config.hidden, config.hidden, config.flat()}, "gelu", true,
                        false},
                       "vq/decoder", store_, rng);
  Tensor table({config.codes, config.latent});
  for (auto& v : table.data()) v = rng.normal();
  codebook_ = store_.add("vq/codebook", std::move(table));
  usage_.assign(config.codes, 0);
}

bool VqModel::is_encoder_param(std::size_t i) const { return i < encoder_end_; }
bool VqModel::is_decoder_param(std::size_t i) const { return i >= encoder_end_ && i < codebook_; }

Var VqModel::encoder(const BoundParams& p, Var x) const {
  Var z = encoder_.forward(p, x);
  return config_.normalize_latent && config_.latent > 1 ? p.graph().layer_norm(z) : z;
}
Var VqModel::decoder(const BoundParams& p, Var z) const { return decoder_.forward(p, z); }

Tensor VqModel::encode(const Tensor& chunks) const {
  if (chunks.cols() != config_.flat()) {
    throw ShapeError("vq encode: expected flattened chunks of width " +
                     std::to_string(config_.flat()) + ", got " + shape_string(chunks.shape()));
  }
  Graph g;
  BoundParams p(g, store_, false);
  Tensor x = chunks.rank() == 2 ? chunks : chunks.reshaped({1, chunks.size()});
  return g.value(encoder(p, g.input(std::move(x))));
}

Tensor VqModel::decode(const Tensor& latents) const {
  if (latents.cols() != config_.latent) {
    throw ShapeError("vq decode: expected latents of width " + std::to_string(config_.latent) +
                     ", got " + shape_string(latents.shape()));
  }
  Graph g;
  BoundParams p(g, store_, false);
  Tensor z = latents.rank() == 2 ? latents : latents.reshaped({1, latents.size()});
  return g.value(decoder(p, g.input(std::move(z))));
}

std::vector<std::size_t> VqModel::assign(const Tensor& chunks) const {
  const Tensor z = encode(chunks);
  std::vector<std::size_t> out(z.rows());
  for (std::size_t i = 0; i < z.rows(); ++i) out[i] = nearest_row(codebook(), z.row_span(i));
  return out;
}

nets::Checkpoint VqModel::to_checkpoint() const {
  nets::Checkpoint ck;
  ck.set_meta("kind", "vq");
  ck.set_meta("chunk_len", std::to_string(config_.chunk_len));
  ck.set_meta("action_dim", std::to_string(config_.action_dim));
  ck.set_meta("codes", std::to_string(config_.codes));
  ck.set_meta("latent", std::to_string(config_.latent));
  ck.set_meta("hidden", std::to_string(config_.hidden));
  ck.set_meta("normalize_latent", config_.normalize_latent ? "1" : "0");
  std::ostringstream beta;
  beta.precision(17);
  beta << config_.beta;
  ck.set_meta("beta", beta.str());
  ck.add_params("", store_);
  Tensor usage({config_.codes});
  for (std::size_t k = 0; k < config_.codes; ++k) usage[k] = static_cast<double>(usage_[k]);
  ck.add("vq/usage", usage);
  return ck;
}

VqModel VqModel::from_checkpoint(const nets::Checkpoint& ck) {
  if (!ck.has_meta("kind") || ck.meta("kind") != "vq") {
    throw FormatError("checkpoint is not a VQ artifact");
  }
  VqConfig c;
  c.chunk_len = std::stoul(ck.meta("chunk_len"));
  c.action_dim = std::stoul(ck.meta("action_dim"));
  c.codes = std::stoul(ck.meta("codes"));
  c.latent = std::stoul(ck.meta("latent"));
  c.hidden = std::stoul(ck.meta("hidden"));
  c.normalize_latent = ck.meta("normalize_latent") == "1";
  c.beta = std::stod(ck.meta("beta"));
  Rng scratch(0);
  VqModel m(c, scratch);
  ck.load_params("", m.store_);
  const Tensor& usage = ck.get("vq/usage");
  for (std::size_t k = 0; k < c.codes; ++k) m.usage_[k] = static_cast<std::uint64_t>(usage[k]);
  return m;
}

std::pair<std::size_t, Tensor> quantize(std::span<const double> z, const Tensor& codebook) {
  const std::size_t k = nearest_row(codebook, z);
  auto row = codebook.row_span(k);
  return {k, Tensor::row({row.begin(), row.end()})};
}

namespace {

// Squared norm per row, averaged over rows.
Var mean_sqnorm(Graph& g, Var d) {
  return g.scale(g.sum(g.mul(d, d)), 1.0 / static_cast<double>(g.value(d).rows()));
}

}  // namespace

VqLossGraph vq_loss_graph(const VqModel& model, const BoundParams& p, const Tensor& chunks) {
  Graph& g = p.graph();
  VqLossGraph out;
  Var x = g.input(chunks);
  out.latent = model.encoder(p, x);
  const Tensor& ze = g.value(out.latent);
  out.indices.resize(ze.rows());
  for (std::size_t i = 0; i < ze.rows(); ++i) {
    out.indices[i] = nearest_row(model.codebook(), ze.row_span(i));
  }
  out.quantized = g.gather_rows(p[model.codebook_index()], out.indices);
  // z_e + sg(z_q - z_e): value of z_q, gradient of z_e.
  out.straight_through = g.add(out.latent, g.stop_gradient(g.sub(out.quantized, out.latent)));
  Var recon = model.decoder(p, out.straight_through);
  Var err = g.sub(x, recon);
  out.reconstruction = mean_sqnorm(g, err);
  Var cb = g.sub(g.stop_gradient(out.latent), out.quantized);
  out.codebook = mean_sqnorm(g, cb);
  Var cm = g.sub(out.latent, g.stop_gradient(out.quantized));
  out.commitment = mean_sqnorm(g, cm);
  out.total = g.add(g.add(out.reconstruction, out.codebook),
                    g.scale(out.commitment, model.config().beta));
  return out;
}

VqLossTerms vq_loss(const VqModel& model, const Tensor& chunks) {
  Graph g;
  BoundParams p(g, model.params(), false);
  const auto l = vq_loss_graph(model, p, chunks);
  return {g.value(l.reconstruction)[0], g.value(l.codebook)[0], g.value(l.commitment)[0],
          model.config().beta};
}

Tensor chunk_matrix(const synthenv::Dataset& ds) {
  const auto steps = synthenv::all_steps(ds);
  const std::size_t f = ds.chunk_len * ds.env.action_dim;
  Tensor out({steps.size(), f});
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const Tensor c = synthenv::normalize_actions(ds.stats, ds.chunk(steps[i].demo, steps[i].t));
    std::copy(c.vec().begin(), c.vec().end(), out.row_span(i).begin());
  }
  return out;
}

std::vector<std::size_t> mode_tags(const synthenv::Dataset& ds) {
  std::vector<std::size_t> out;
  for (const auto& s : synthenv::all_steps(ds)) out.push_back(ds.demos[s.demo].mode);
  return out;
}

namespace {

Tensor take_rows(const Tensor& src, std::span<const std::size_t> rows) {
  Tensor out({rows.size(), src.cols()});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto s = src.row_span(rows[i]);
    std::copy(s.begin(), s.end(), out.row_span(i).begin());
  }
  return out;
}

}  // namespace

VqTrainResult train_vqvae(const Tensor& chunks, const VqConfig& config, Rng& rng) {
  validate(config);
  const std::size_t n = chunks.rows();
  if (n == 0) throw ValidationError("vq training needs a non-empty dataset");
  if (chunks.cols() != config.flat()) throw ShapeError("vq training: chunk width mismatch");

  VqTrainResult res{VqModel(config, rng), {}, {}};
  VqModel& model = res.model;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  nets::AdamW opt({0.9, 0.999, 1e-8, config.weight_decay}, model.params());
  const std::size_t per_epoch = (n + config.batch - 1) / config.batch;
  const nets::ScheduleConfig ae_sched{per_epoch, per_epoch * config.ae_epochs + 1, config.ae_lr};
  const nets::ScheduleConfig sched{per_epoch, per_epoch * config.epochs + 1, config.lr};
  std::uint64_t step = 0;

  for (std::size_t epoch = 0; epoch < config.ae_epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t b = 0; b < n; b += config.batch) {
      const auto rows = std::span(order).subspan(b, std::min(config.batch, n - b));
      Graph g;
      BoundParams p(g, model.params(), true);
      Var x = g.input(take_rows(chunks, rows));
      Var err = g.sub(x, model.decoder(p, model.encoder(p, x)));
      g.backward(g.mean(g.mul(err, err)));
      opt.step(model.params(), p.grads(), nets::lr_at(++step, ae_sched));
    }
  }
  step = 0;

  // Codebook init from k-means over encoder outputs of a warmup batch;
  // the random normal table stays when K exceeds the batch.
  {
    rng.shuffle(order);
    const std::size_t w = std::min(n, config.warmup_batch);
    const Tensor z = model.encode(take_rows(chunks, std::span(order).first(w)));
    if (config.codes <= w) {
      model.params().value(model.codebook_index()) = kmeans(z, config.codes, rng, 50).centroids;
    }
  }

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    std::vector<std::uint64_t> used(config.codes, 0);
    VqLossTerms acc{0, 0, 0, config.beta};
    for (std::size_t b = 0; b < n; b += config.batch) {
      const auto rows = std::span(order).subspan(b, std::min(config.batch, n - b));
      Graph g;
      BoundParams p(g, model.params(), true);
      const auto l = vq_loss_graph(model, p, take_rows(chunks, rows));
      g.backward(l.total);
      for (auto k : l.indices) ++used[k];
      const double w = static_cast<double>(rows.size()) / static_cast<double>(n);
      acc.reconstruction += w * g.value(l.reconstruction)[0];
      acc.codebook += w * g.value(l.codebook)[0];
      acc.commitment += w * g.value(l.commitment)[0];
      opt.step(model.params(), p.grads(), nets::lr_at(++step, sched));
    }
    if (!std::isfinite(acc.total())) throw NonFiniteError("vq training: non-finite loss");
    res.curve.push_back(acc);
    // Dead entries restart at the latent of a random chunk.
    std::size_t resets = 0;
    if (epoch + 1 < config.epochs) {
      Tensor& table = model.params().value(model.codebook_index());
      for (std::size_t k = 0; k < config.codes; ++k) {
        if (used[k] > 0) continue;
        const std::size_t pick = rng.uniform_index(n);
        const Tensor z = model.encode(take_rows(chunks, std::span(&pick, 1)));
        std::copy(z.vec().begin(), z.vec().end(), table.row_span(k).begin());
        ++resets;
      }
    }
    res.resets.push_back(resets);
  }
  std::fill(model.usage().begin(), model.usage().end(), 0);
  for (auto k : model.assign(chunks)) ++model.usage()[k];
  return res;
}

double codebook_perplexity(const std::vector<std::size_t>& assignments) {
  if (assignments.empty()) throw ValidationError("perplexity of empty assignments");
  std::map<std::size_t, std::size_t> counts;
  for (auto a : assignments) ++counts[a];
  const double n = static_cast<double>(assignments.size());
  double h = 0.0;
  for (const auto& [k, c] : counts) {
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return std::exp(h);
}

std::string assignments_csv(const std::vector<std::size_t>& assignments) {
  std::string out = "chunk,mode\n";
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    out += std::to_string(i) + "," + std::to_string(assignments[i]) + "\n";
  }
  return out;
}

}  // namespace modeflow::vqtok
