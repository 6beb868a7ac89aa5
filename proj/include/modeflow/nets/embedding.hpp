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

#include <string>
#include <vector>

#include "modeflow/nets/params.hpp"

namespace modeflow::nets {

// Row vector [1, dim] of interleaved (sin(w_i t), cos(w_i t)) pairs with
// w_i = 10000^(-2i/dim). Throws ValidationError for odd or zero dim.
Tensor sinusoidal_embed(double t, std::size_t dim);

// Learnable K x D table; lookup is a row gather.
class ModeEmbedding {
 public:
  ModeEmbedding() = default;
  ModeEmbedding(std::size_t modes, std::size_t dim, const std::string& prefix, ParamStore& store,
                Rng& rng);

  Var forward(const BoundParams& params, const std::vector<std::size_t>& modes) const;

  std::size_t modes() const { return modes_; }
  std::size_t dim() const { return dim_; }
  std::size_t table_index() const { return table_; }

 private:
  std::size_t modes_ = 0, dim_ = 0, table_ = 0;
};

}  // namespace modeflow::nets
