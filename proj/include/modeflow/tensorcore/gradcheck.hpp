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

#include <functional>
#include <span>
#include <vector>

#include "modeflow/tensorcore/graph.hpp"
#include "modeflow/tensorcore/rng.hpp"

namespace modeflow {

// Builds a computation from leaf handles (one per input tensor) and returns
// the output handle.
using GraphBuilder = std::function<Var(Graph&, std::span<const Var>)>;

struct GradCheckResult {
  // Norm-wise relative errors: max|analytic - fd| / max(max|fd|, max|analytic|, floor).
  double reverse_rel_error = 0.0;
  double jvp_rel_error = 0.0;
  // |u.(J v) - v.(J^T u)| / max(|u.(J v)|, 1).
  double duality_residual = 0.0;
};

// Compares backward() and jvp() of `build` at `inputs` against central finite
// differences with step `eps`. Random projection / tangent directions come
// from `rng`.
GradCheckResult check_gradients(const GraphBuilder& build, std::span<const Tensor> inputs,
                                Rng& rng, double eps = 1e-5);

}  // namespace modeflow
