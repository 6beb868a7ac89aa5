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

#include "modeflow/nets/adamw.hpp"

#include <cmath>

#include "modeflow/tensorcore/error.hpp"

namespace modeflow::nets {

AdamW::AdamW(const AdamWConfig& config, const ParamStore& store) : config_(config) {
  if (config.beta1 < 0 || config.beta1 >= 1 || config.beta2 < 0 || config.beta2 >= 1 ||
      config.eps <= 0 || config.weight_decay < 0) {
    throw ValidationError("invalid AdamW hyperparameters");
  }
  for (std::size_t i = 0; i < store.size(); ++i) {
    state_.m.emplace_back(store.value(i).shape());
    state_.v.emplace_back(store.value(i).shape());
  }
}

void AdamW::step(ParamStore& store, const std::vector<Tensor>& grads, double lr,
                 const std::vector<bool>& frozen) {
  if (grads.size() != store.size() || state_.m.size() != store.size()) {
    throw ShapeError("AdamW: gradient count does not match parameters");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].shape() != store.value(i).shape()) {
      throw ShapeError("AdamW: gradient shape mismatch for " + store.name(i));
    }
    if (!grads[i].all_finite()) throw NonFiniteError("AdamW: non-finite gradient for " + store.name(i));
  }
  ++state_.step;
  const double t = static_cast<double>(state_.step);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  const double b1 = config_.beta1, b2 = config_.beta2;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (i < frozen.size() && frozen[i]) continue;
    auto p = store.value(i).data();
    auto m = state_.m[i].data();
    auto v = state_.v[i].data();
    auto g = grads[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = b1 * m[j] + (1 - b1) * g[j];
      v[j] = b2 * v[j] + (1 - b2) * g[j] * g[j];
      p[j] -= lr * config_.weight_decay * p[j];
      p[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + config_.eps);
    }
  }
}

}  // namespace modeflow::nets
