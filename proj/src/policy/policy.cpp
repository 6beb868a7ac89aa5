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

#include "modeflow/policy/policy.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "modeflow/tensorcore/error.hpp"

namespace modeflow::policy {

using nets::BoundParams;

std::string kind_name(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kPfdag: return "pfdag";
    case PolicyKind::kBc: return "bc";
    case PolicyKind::kCfm: return "cfm";
    case PolicyKind::kMeanflowSingle: return "meanflow-single";
    case PolicyKind::kVqOnly: return "vq-only";
  }
  return "?";
}

PolicyKind parse_kind(const std::string& name) {
  for (auto k : {PolicyKind::kPfdag, PolicyKind::kBc, PolicyKind::kCfm,
                 PolicyKind::kMeanflowSingle, PolicyKind::kVqOnly}) {
    if (kind_name(k) == name) return k;
  }
  throw ValidationError("unknown policy kind '" + name +
                        "' (expected pfdag, bc, cfm, meanflow-single or vq-only)");
}

void validate(const PolicyConfig& c) {
  if (c.chunk_len == 0 || c.action_dim == 0) throw ValidationError("policy: empty chunk shape");
  if (c.exec_len == 0 || c.exec_len > c.chunk_len) {
    throw ValidationError("policy: need 1 <= T_a <= T_p");
  }
  if (c.head_hidden == 0) throw ValidationError("policy: head width must be positive");
}

bool selects_mode(const PolicyConfig& c) {
  return c.kind == PolicyKind::kPfdag || c.kind == PolicyKind::kVqOnly ||
         (c.kind == PolicyKind::kCfm && c.two_stage);
}

bool has_field(const PolicyConfig& c) {
  return c.kind == PolicyKind::kPfdag || c.kind == PolicyKind::kCfm ||
         c.kind == PolicyKind::kMeanflowSingle;
}

Policy::Policy(const PolicyConfig& config, std::optional<vqtok::Tokenizer> tokenizer,
               synthenv::NormStats stats, Tensor points, Rng& rng)
    : config_(config), tokenizer_(std::move(tokenizer)), stats_(std::move(stats)),
      points_(std::move(points)) {
  validate(config_);
  if (selects_mode(config_) != tokenizer_.has_value()) {
    throw ValidationError("policy kind '" + kind_name(config_.kind) +
                          (tokenizer_ ? "' takes no tokenizer" : "' needs a tokenizer"));
  }
  if (tokenizer_ && tokenizer_->flat() != config_.flat()) {
    throw ShapeError("policy: tokenizer chunk width differs from T_p * d_a");
  }
  if (stats_.action_mean.size() != config_.action_dim ||
      stats_.proprio_mean.size() != config_.encoder.proprio_dim) {
    throw ShapeError("policy: normalization stats do not match the configured dims");
  }
  if (points_.cols() != 3 || points_.rows() == 0) throw ShapeError("policy: points must be [P, 3]");

  encoder_ = nets::ObsEncoder(config_.encoder, "enc", store_, rng);
  const std::size_t e = encoder_.out_dim();
  if (selects_mode(config_)) {
    pm_ = nets::Mlp({{e, config_.head_hidden, tokenizer_->modes()}, "gelu", true, false}, "pm",
                    store_, rng);
  }
  if (config_.kind == PolicyKind::kBc) {
    regressor_ = nets::Mlp(
        {{e, config_.head_hidden, config_.head_hidden, config_.flat()}, "gelu", true, false}, "bc",
        store_, rng);
  }
  if (has_field(config_)) {
    config_.field.flat = config_.flat();
    config_.field.obs_dim = e;
    config_.field.modes = selects_mode(config_) ? tokenizer_->modes() : 0;
    field_ = VelocityField(config_.field, "field", store_, rng);
  }
}

nets::ObsBatch Policy::observe_normalized(Tensor proprio) const {
  nets::ObsBatch obs;
  obs.point_sets = {points_};
  obs.set_index.assign(proprio.rows(), 0);
  obs.proprio = std::move(proprio);
  return obs;
}

nets::ObsBatch Policy::observe(const Tensor& raw) const {
  Tensor norm(raw.shape());
  for (std::size_t i = 0; i < raw.rows(); ++i) {
    const auto n = synthenv::normalize_proprio(stats_, raw.row_span(i));
    std::copy(n.begin(), n.end(), norm.row_span(i).begin());
  }
  return observe_normalized(std::move(norm));
}

Var Policy::embed(const BoundParams& p, const nets::ObsBatch& obs) const {
  return encoder_.forward(p, obs);
}

Var Policy::pm_logits(const BoundParams& p, Var embedding) const {
  if (!selects_mode(config_)) throw ValidationError("policy kind has no primary mode head");
  return pm_.forward(p, embedding);
}

Var Policy::field(const BoundParams& p, Var z, Var tau, Var r, Var embedding,
                  const std::vector<std::size_t>& modes) const {
  if (!has_field(config_)) throw ValidationError("policy kind has no velocity field");
  return field_.forward(p, z, tau, r, embedding, modes);
}

Var Policy::regress(const BoundParams& p, Var embedding) const {
  if (config_.kind != PolicyKind::kBc) throw ValidationError("policy kind has no regression head");
  return regressor_.forward(p, embedding);
}

Tensor Policy::embedding(const Tensor& raw_proprio) const {
  Graph g;
  BoundParams p(g, store_, false);
  return g.value(embed(p, observe(raw_proprio)));
}

Tensor Policy::pm_logits(const Tensor& embedding) const {
  Graph g;
  BoundParams p(g, store_, false);
  return g.value(pm_logits(p, g.input(embedding)));
}

Tensor Policy::field(const Tensor& z, double tau, double r, const Tensor& embedding,
                     const std::vector<std::size_t>& modes) const {
  Graph g;
  BoundParams p(g, store_, false);
  const std::size_t b = z.rows();
  return g.value(field(p, g.input(z), g.input(Tensor::full({b, 1}, tau)),
                       g.input(Tensor::full({b, 1}, r)), g.input(embedding), modes));
}

namespace {

std::string num(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

std::size_t meta_size(const nets::Checkpoint& ck, const std::string& key) {
  try {
    return std::stoul(ck.meta(key));
  } catch (const std::logic_error&) {
    throw FormatError("policy checkpoint: bad value for '" + key + "'");
  }
}

double meta_real(const nets::Checkpoint& ck, const std::string& key) {
  try {
    return std::stod(ck.meta(key));
  } catch (const std::logic_error&) {
    throw FormatError("policy checkpoint: bad value for '" + key + "'");
  }
}

Tensor vec_tensor(const std::vector<double>& v) { return Tensor::row(v); }

std::vector<double> tensor_vec(const Tensor& t) { return t.vec(); }

}  // namespace

nets::Checkpoint Policy::to_checkpoint() const {
  nets::Checkpoint ck;
  const auto& c = config_;
  ck.set_meta("kind", "policy");
  ck.set_meta("policy_kind", kind_name(c.kind));
  ck.set_meta("chunk_len", std::to_string(c.chunk_len));
  ck.set_meta("action_dim", std::to_string(c.action_dim));
  ck.set_meta("exec_len", std::to_string(c.exec_len));
  ck.set_meta("head_hidden", std::to_string(c.head_hidden));
  ck.set_meta("two_stage", c.two_stage ? "1" : "0");
  ck.set_meta("solver", c.solver.name());
  const auto& e = c.encoder;
  ck.set_meta("enc.proprio_dim", std::to_string(e.proprio_dim));
  ck.set_meta("enc.sensor_dim", std::to_string(e.sensor_dim));
  ck.set_meta("enc.point_hidden", std::to_string(e.point_hidden));
  ck.set_meta("enc.point_out", std::to_string(e.point_out));
  ck.set_meta("enc.proprio_out", std::to_string(e.proprio_out));
  ck.set_meta("enc.sensor_out", std::to_string(e.sensor_out));
  ck.set_meta("enc.fusion_hidden", std::to_string(e.fusion_hidden));
  ck.set_meta("enc.out_dim", std::to_string(e.out_dim));
  const auto& f = c.field;
  ck.set_meta("field.obs_proj", std::to_string(f.obs_proj));
  ck.set_meta("field.mode_dim", std::to_string(f.mode_dim));
  ck.set_meta("field.time_dim", std::to_string(f.time_dim));
  ck.set_meta("field.time_scale", num(f.time_scale));
  ck.set_meta("field.time_base", num(f.time_base));
  ck.set_meta("field.hidden", std::to_string(f.hidden));
  ck.set_meta("field.depth", std::to_string(f.depth));
  ck.set_meta("has_tokenizer", tokenizer_ ? "1" : "0");
  if (tokenizer_) tokenizer_->write(ck, "tok/");
  ck.add("stats/proprio_mean", vec_tensor(stats_.proprio_mean));
  ck.add("stats/proprio_std", vec_tensor(stats_.proprio_std));
  ck.add("stats/action_mean", vec_tensor(stats_.action_mean));
  ck.add("stats/action_std", vec_tensor(stats_.action_std));
  ck.add("obs/points", points_);
  ck.add_params("policy/", store_);
  return ck;
}

Policy Policy::from_checkpoint(const nets::Checkpoint& ck, std::optional<PolicyKind> expected) {
  if (!ck.has_meta("kind") || ck.meta("kind") != "policy") {
    throw FormatError("checkpoint is not a policy bundle");
  }
  PolicyConfig c;
  c.kind = parse_kind(ck.meta("policy_kind"));
  if (expected && *expected != c.kind) {
    throw ValidationError("policy bundle has kind '" + kind_name(c.kind) + "', expected '" +
                          kind_name(*expected) + "'");
  }
  c.chunk_len = meta_size(ck, "chunk_len");
  c.action_dim = meta_size(ck, "action_dim");
  c.exec_len = meta_size(ck, "exec_len");
  c.head_hidden = meta_size(ck, "head_hidden");
  c.two_stage = ck.meta("two_stage") == "1";
  c.solver = parse_solver(ck.meta("solver"));
  auto& e = c.encoder;
  e.proprio_dim = meta_size(ck, "enc.proprio_dim");
  e.sensor_dim = meta_size(ck, "enc.sensor_dim");
  e.point_hidden = meta_size(ck, "enc.point_hidden");
  e.point_out = meta_size(ck, "enc.point_out");
  e.proprio_out = meta_size(ck, "enc.proprio_out");
  e.sensor_out = meta_size(ck, "enc.sensor_out");
  e.fusion_hidden = meta_size(ck, "enc.fusion_hidden");
  e.out_dim = meta_size(ck, "enc.out_dim");
  auto& f = c.field;
  f.obs_proj = meta_size(ck, "field.obs_proj");
  f.mode_dim = meta_size(ck, "field.mode_dim");
  f.time_dim = meta_size(ck, "field.time_dim");
  f.time_scale = meta_real(ck, "field.time_scale");
  f.time_base = meta_real(ck, "field.time_base");
  f.hidden = meta_size(ck, "field.hidden");
  f.depth = meta_size(ck, "field.depth");

  std::optional<vqtok::Tokenizer> tok;
  if (ck.meta("has_tokenizer") == "1") tok = vqtok::Tokenizer::read(ck, "tok/");
  synthenv::NormStats stats{tensor_vec(ck.get("stats/proprio_mean")),
                            tensor_vec(ck.get("stats/proprio_std")),
                            tensor_vec(ck.get("stats/action_mean")),
                            tensor_vec(ck.get("stats/action_std"))};
  Rng scratch(0);
  Policy pol(c, std::move(tok), std::move(stats), ck.get("obs/points"), scratch);
  ck.load_params("policy/", pol.store_);
  return pol;
}

std::size_t pm_select(std::span<const double> logits) {
  if (logits.empty()) throw ValidationError("pm_select: empty logits");
  std::size_t best = 0;
  for (std::size_t k = 1; k < logits.size(); ++k) {
    if (logits[k] > logits[best]) best = k;
  }
  return best;
}

std::vector<double> mode_probabilities(std::span<const double> logits) {
  Graph g;
  const Tensor& p =
      g.value(g.softmax(g.input(Tensor::row({logits.begin(), logits.end()}))));
  return p.vec();
}

Tensor sample_residual(const Policy& policy, const Tensor& embedding,
                       std::optional<std::size_t> mode, Rng& rng, std::size_t* field_evals) {
  const std::size_t f = policy.config().flat();
  Tensor z0 = rng.normal_tensor({1, f});
  std::vector<std::size_t> modes;
  if (mode) modes.push_back(*mode);
  const Tensor u = policy.field(z0, 0.0, 1.0, embedding, modes);
  if (field_evals) ++*field_evals;
  for (std::size_t j = 0; j < f; ++j) z0[j] -= u[j];
  return z0;
}

namespace {

Tensor raw_row(std::span<const double> proprio) {
  return Tensor::row({proprio.begin(), proprio.end()});
}

Action finish(const Policy& policy, Tensor normalized, std::optional<std::size_t> mode) {
  const auto& c = policy.config();
  if (!normalized.all_finite()) throw NonFiniteError("policy produced a non-finite chunk");
  Action a;
  a.chunk = synthenv::denormalize_actions(policy.stats(),
                                          normalized.reshaped({c.chunk_len, c.action_dim}));
  a.normalized = std::move(normalized);
  a.mode = mode;
  return a;
}

void require_kind(const Policy& policy, PolicyKind kind) {
  if (policy.kind() != kind) {
    throw ValidationError("policy of kind '" + kind_name(policy.kind()) + "' used as '" +
                          kind_name(kind) + "'");
  }
}

void add_into(Tensor& dst, const Tensor& src) {
  for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
}

}  // namespace

Action pfdag_act(const Policy& policy, std::span<const double> proprio, Rng& rng,
                 bool zero_residual) {
  require_kind(policy, PolicyKind::kPfdag);
  const Tensor emb = policy.embedding(raw_row(proprio));
  const Tensor logits = policy.pm_logits(emb);
  const std::size_t m = pm_select(logits.data());
  Tensor chunk = policy.tokenizer()->prototype(m);
  std::size_t evals = 0;
  if (!zero_residual) add_into(chunk, sample_residual(policy, emb, m, rng, &evals));
  Action a = finish(policy, std::move(chunk), m);
  a.field_evals = evals;
  a.classifier_evals = 1;
  a.decoder_evals = policy.tokenizer()->kind() == vqtok::Tokenizer::Kind::kVq ? 1 : 0;
  return a;
}

Action cfm_sample(const Policy& policy, std::span<const double> proprio, Rng& rng,
                  const Solver& solver) {
  require_kind(policy, PolicyKind::kCfm);
  const auto& c = policy.config();
  const Tensor emb = policy.embedding(raw_row(proprio));
  std::optional<std::size_t> m;
  std::vector<std::size_t> modes;
  if (c.two_stage) {
    m = pm_select(policy.pm_logits(emb).data());
    modes.push_back(*m);
  }
  const Tensor z0 = rng.normal_tensor({1, c.flat()});
  // Noise sits at r = 1; dz/dr is the instantaneous velocity v(z, r, r).
  const OdeResult sol = integrate(
      [&](const Tensor& z, double r) { return policy.field(z, r, r, emb, modes); }, z0, 1.0, 0.0,
      solver);
  Tensor chunk = sol.z;
  if (m) add_into(chunk, policy.tokenizer()->prototype(*m));
  Action a = finish(policy, std::move(chunk), m);
  a.field_evals = sol.nfe;
  a.classifier_evals = m ? 1 : 0;
  a.decoder_evals = m && policy.tokenizer()->kind() == vqtok::Tokenizer::Kind::kVq ? 1 : 0;
  return a;
}

Action bc_act(const Policy& policy, std::span<const double> proprio) {
  require_kind(policy, PolicyKind::kBc);
  Graph g;
  BoundParams p(g, policy.params(), false);
  Var emb = policy.embed(p, policy.observe(raw_row(proprio)));
  return finish(policy, g.value(policy.regress(p, emb)), std::nullopt);
}

Action meanflow_single_act(const Policy& policy, std::span<const double> proprio, Rng& rng) {
  require_kind(policy, PolicyKind::kMeanflowSingle);
  std::size_t evals = 0;
  Tensor chunk =
      sample_residual(policy, policy.embedding(raw_row(proprio)), std::nullopt, rng, &evals);
  Action a = finish(policy, std::move(chunk), std::nullopt);
  a.field_evals = evals;
  return a;
}

Action vq_only_act(const Policy& policy, std::span<const double> proprio) {
  require_kind(policy, PolicyKind::kVqOnly);
  const std::size_t m = pm_select(policy.pm_logits(policy.embedding(raw_row(proprio))).data());
  Action a = finish(policy, policy.tokenizer()->prototype(m), m);
  a.classifier_evals = 1;
  a.decoder_evals = policy.tokenizer()->kind() == vqtok::Tokenizer::Kind::kVq ? 1 : 0;
  return a;
}

Action act(const Policy& policy, std::span<const double> proprio, Rng& rng,
           const ActOptions& options) {
  switch (policy.kind()) {
    case PolicyKind::kPfdag: return pfdag_act(policy, proprio, rng, options.zero_residual);
    case PolicyKind::kBc: return bc_act(policy, proprio);
    case PolicyKind::kCfm:
      return cfm_sample(policy, proprio, rng, options.solver.value_or(policy.config().solver));
    case PolicyKind::kMeanflowSingle: return meanflow_single_act(policy, proprio, rng);
    case PolicyKind::kVqOnly: return vq_only_act(policy, proprio);
  }
  throw ValidationError("unknown policy kind");
}

}  // namespace modeflow::policy
