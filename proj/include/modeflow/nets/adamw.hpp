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

#include <vector>

#include "modeflow/nets/params.hpp"

namespace modeflow::nets {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct OptimState {
  std::vector<Tensor> m, v;
  std::uint64_t step = 0;
};

// AdamW with decoupled weight decay:
//   p <- p - lr*wd*p - lr * m_hat / (sqrt(v_hat) + eps)
class AdamW {
 public:
  AdamW(const AdamWConfig& config, const ParamStore& store);

  // `frozen[i]` skips parameter i entirely (no decay, no moment update).
  void step(ParamStore& store, const std::vector<Tensor>& grads, double lr,
            const std::vector<bool>& frozen = {});

  const OptimState& state() const { return state_; }
  const AdamWConfig& config() const { return config_; }

 private:
  AdamWConfig config_;
  OptimState state_;
};

}  // namespace modeflow::nets
