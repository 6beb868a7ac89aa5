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

#include "modeflow/policy/field.hpp"

#include <algorithm>
#include <cmath>

#include "modeflow/tensorcore/error.hpp"

namespace modeflow::policy {

void validate(const FieldConfig& c) {
  if (c.flat == 0 || c.obs_dim == 0 || c.obs_proj == 0) {
    throw ValidationError("field: widths must be positive");
  }
  if (c.time_dim == 0 || c.time_dim % 2 != 0) {
    throw ValidationError("field: time embedding dim must be even and positive");
  }
  if (c.modes > 0 && c.mode_dim == 0) throw ValidationError("field: mode dim must be positive");
  if (c.hidden == 0 || c.depth == 0) throw ValidationError("field: trunk must have hidden layers");
  if (!(c.time_scale > 0) || !(c.time_base > 1)) throw ValidationError("field: bad time embedding");
}

VelocityField::VelocityField(const FieldConfig& config, const std::string& prefix,
                             nets::ParamStore& store, Rng& rng)
    : config_(config) {
  validate(config_);
  obs_proj_ = nets::Mlp({{config.obs_dim, config.obs_proj}, "gelu", true, false},
                        prefix + "/obs_proj", store, rng);
  if (config.modes > 0) {
    mode_table_ = nets::ModeEmbedding(config.modes, config.mode_dim, prefix + "/mode", store, rng);
  }
  std::vector<std::size_t> widths{config.flat + config.cond_dim()};
  for (std::size_t i = 0; i < config.depth; ++i) widths.push_back(config.hidden);
  widths.push_back(config.flat);
  trunk_ = nets::Mlp({widths, "gelu", true, false}, prefix + "/trunk", store, rng);
}

Var VelocityField::forward(const nets::BoundParams& p, Var z, Var tau, Var r, Var obs,
                           const std::vector<std::size_t>& modes) const {
  Graph& g = p.graph();
  const std::size_t b = g.value(z).rows();
  if (g.value(z).cols() != config_.flat) throw ShapeError("field: z width mismatch");
  if (g.value(tau).rows() != b || g.value(r).rows() != b || g.value(obs).rows() != b) {
    throw ShapeError("field: batch size mismatch between inputs");
  }
  auto embed = [&](Var t) {
    return g.sinusoidal(g.scale(t, config_.time_scale), config_.time_dim, config_.time_base);
  };
  std::vector<Var> parts{z, embed(tau), embed(r), obs_proj_.forward(p, obs)};
  if (config_.modes > 0) {
    if (modes.size() != b) throw ShapeError("field: one mode per row required");
    parts.push_back(mode_table_.forward(p, modes));
  } else if (!modes.empty()) {
    throw ValidationError("field: modes given to a field without mode embedding");
  }
  return trunk_.forward(p, g.concat(parts));
}

FlowSample make_flow_sample(const Tensor& data, Tensor z0, Tensor tau, Tensor r) {
  const std::size_t b = data.rows(), f = data.cols();
  if (z0.rows() != b || z0.cols() != f) throw ShapeError("flow sample: noise shape mismatch");
  if (tau.rows() != b || r.rows() != b || tau.cols() != 1 || r.cols() != 1) {
    throw ShapeError("flow sample: times must be [B, 1]");
  }
  FlowSample s{std::move(z0), std::move(tau), std::move(r), Tensor({b, f}), Tensor({b, f})};
  for (std::size_t i = 0; i < b; ++i) {
    const double ri = s.r[i];
    if (!(0.0 <= s.tau[i] && s.tau[i] <= ri && ri <= 1.0)) {
      throw ValidationError("flow sample: need 0 <= tau <= r <= 1");
    }
    for (std::size_t j = 0; j < f; ++j) {
      const double x = data.at(i, j), n = s.z0.at(i, j);
      s.z_r.at(i, j) = (1.0 - ri) * x + ri * n;
      s.v.at(i, j) = n - x;
    }
  }
  return s;
}

std::pair<Tensor, Tensor> sample_intervals(std::size_t rows, Rng& rng, double equal_prob) {
  Tensor tau({rows, 1}), r({rows, 1});
  for (std::size_t i = 0; i < rows; ++i) {
    double a = rng.uniform(), c = rng.uniform();
    if (a > c) std::swap(a, c);
    if (rng.uniform() < equal_prob) a = c;
    tau[i] = a;
    r[i] = c;
  }
  return {std::move(tau), std::move(r)};
}

Tensor meanflow_target_from(const FlowSample& s, const Tensor& dudt) {
  if (dudt.shape() != s.v.shape()) throw ShapeError("meanflow target: tangent shape mismatch");
  Tensor out = s.v;
  const std::size_t f = out.cols();
  for (std::size_t i = 0; i < out.rows(); ++i) {
    const double h = s.r[i] - s.tau[i];
    for (std::size_t j = 0; j < f; ++j) out.at(i, j) -= h * dudt.at(i, j);
  }
  if (!out.all_finite()) throw NonFiniteError("meanflow target is not finite");
  return out;
}

Tensor meanflow_target(const FlowSample& s, const FieldFn& field) {
  Graph g;
  Var z = g.input(s.z_r), tau = g.input(s.tau), r = g.input(s.r);
  Var u = field(g, z, tau, r);
  g.jvp({{z, s.v}, {r, Tensor::full(s.r.shape(), 1.0)}});
  return meanflow_target_from(s, g.tangent(u));
}

Var mean_sqdist(Graph& g, Var pred, const Tensor& target) {
  Var d = g.sub(pred, g.input(target));
  return g.scale(g.sum(g.mul(d, d)), 1.0 / static_cast<double>(target.rows()));
}

}  // namespace modeflow::policy
