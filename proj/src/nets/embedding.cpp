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

#include "modeflow/nets/embedding.hpp"

#include <cmath>

#include "modeflow/tensorcore/error.hpp"

namespace modeflow::nets {

Tensor sinusoidal_embed(double t, std::size_t dim) {
  if (dim == 0 || dim % 2 != 0) {
    throw ValidationError("sinusoidal embedding dim must be even and positive, got " +
                          std::to_string(dim));
  }
  Graph g;
  return g.value(g.sinusoidal(g.input(Tensor::matrix(1, 1, {t})), dim));
}

ModeEmbedding::ModeEmbedding(std::size_t modes, std::size_t dim, const std::string& prefix,
                             ParamStore& store, Rng& rng)
    : modes_(modes), dim_(dim) {
  if (modes == 0 || dim == 0) throw ValidationError("mode embedding needs K >= 1 and D >= 1");
  Tensor table({modes, dim});
  const double s = 1.0 / std::sqrt(static_cast<double>(dim));
  for (auto& v : table.data()) v = rng.normal() * s;
  table_ = store.add(prefix + "/table", std::move(table));
}

Var ModeEmbedding::forward(const BoundParams& params,
                           const std::vector<std::size_t>& modes) const {
  for (auto m : modes) {
    if (m >= modes_) {
      throw ValidationError("mode index " + std::to_string(m) + " out of range for K=" +
                            std::to_string(modes_));
    }
  }
  return params.graph().gather_rows(params[table_], modes);
}

}  // namespace modeflow::nets
