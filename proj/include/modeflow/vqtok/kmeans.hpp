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

#include "modeflow/tensorcore/rng.hpp"

namespace modeflow::vqtok {

struct KMeansResult {
  Tensor centroids;                      // [K, F]
  std::vector<std::size_t> assignments;  // per row
  std::vector<double> objective;         // sum of squared distances, per iteration
};

// Index of the nearest row of `table` to `z` in Euclidean distance; ties go
// to the lowest index. `z` has table.cols() entries.
std::size_t nearest_row(const Tensor& table, std::span<const double> z);

// Lloyd iterations from k-means++ seeding. Empty clusters keep their
// centroid. Stops when assignments no longer change or after max_iter.
KMeansResult kmeans(const Tensor& data, std::size_t k, Rng& rng, std::size_t max_iter = 100);

}  // namespace modeflow::vqtok
