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

#include "modeflow/tensorcore/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace modeflow {

namespace {

double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  double diff = 0.0, scale = 1e-8;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
    scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
  }
  return diff / scale;
}

}  // namespace

GradCheckResult check_gradients(const GraphBuilder& build, std::span<const Tensor> inputs,
                                Rng& rng, double eps) {
  Graph g;
  std::vector<Var> leaves;
  for (const auto& t : inputs) leaves.push_back(g.param(t));
  const Var out = build(g, leaves);
  const Tensor projection = rng.normal_tensor(g.value(out).shape());
  std::vector<Tensor> directions;
  for (const auto& t : inputs) directions.push_back(rng.normal_tensor(t.shape()));

  g.backward(out, projection);
  std::vector<double> analytic_grad, numeric_grad;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor grad = g.grad(leaves[k]);
    analytic_grad.insert(analytic_grad.end(), grad.data().begin(), grad.data().end());
  }

  std::vector<std::pair<Var, Tensor>> seeds;
  for (std::size_t k = 0; k < inputs.size(); ++k) seeds.emplace_back(leaves[k], directions[k]);
  g.jvp(seeds);
  const Tensor jv = g.tangent(out);

  // Central differences of u.f(x) per input coordinate.
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor x = inputs[k];
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double x0 = x[i];
      x[i] = x0 + eps;
      g.set_value(leaves[k], x);
      g.forward();
      const double up = dot(projection, g.value(out));
      x[i] = x0 - eps;
      g.set_value(leaves[k], x);
      g.forward();
      const double down = dot(projection, g.value(out));
      x[i] = x0;
      numeric_grad.push_back((up - down) / (2.0 * eps));
    }
    g.set_value(leaves[k], x);
  }

  // Symmetric difference along all directions at once.
  auto shifted = [&](double sign) {
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      Tensor x = inputs[k];
      for (std::size_t i = 0; i < x.size(); ++i) x[i] += sign * eps * directions[k][i];
      g.set_value(leaves[k], x);
    }
    g.forward();
    return g.value(out);
  };
  const Tensor up = shifted(1.0);
  const Tensor down = shifted(-1.0);
  std::vector<double> numeric_jv(up.size());
  for (std::size_t i = 0; i < up.size(); ++i) numeric_jv[i] = (up[i] - down[i]) / (2.0 * eps);

  GradCheckResult result;
  result.reverse_rel_error = relative_error(analytic_grad, numeric_grad);
  result.jvp_rel_error = relative_error(jv.data(), numeric_jv);
  double vjt_u = 0.0;
  std::size_t offset = 0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i = 0; i < directions[k].size(); ++i) {
      vjt_u += directions[k][i] * analytic_grad[offset + i];
    }
    offset += directions[k].size();
  }
  const double u_jv = dot(projection, jv);
  result.duality_residual = std::abs(u_jv - vjt_u) / std::max(std::abs(u_jv), 1.0);
  return result;
}

}  // namespace modeflow
