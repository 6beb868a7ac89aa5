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

#include "modeflow/vqtok/kmeans.hpp"

#include <limits>

#include "modeflow/tensorcore/error.hpp"

namespace modeflow::vqtok {

namespace {

double sqdist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace

std::size_t nearest_row(const Tensor& table, std::span<const double> z) {
  if (table.empty()) throw ValidationError("nearest_row: empty table");
  if (z.size() != table.cols()) {
    throw ShapeError("nearest_row: vector width " + std::to_string(z.size()) + " vs table " +
                     shape_string(table.shape()));
  }
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < table.rows(); ++k) {
    const double d = sqdist(table.row_span(k), z);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

KMeansResult kmeans(const Tensor& data, std::size_t k, Rng& rng, std::size_t max_iter) {
  const std::size_t n = data.rows(), f = data.cols();
  if (k == 0) throw ValidationError("kmeans: K must be positive");
  if (k > n) {
    throw ValidationError("kmeans: K=" + std::to_string(k) + " exceeds number of points " +
                          std::to_string(n));
  }
  KMeansResult res;
  res.centroids = Tensor({k, f});
  // k-means++ seeding.
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t pick = rng.uniform_index(n);
  for (std::size_t c = 0; c < k; ++c) {
    auto row = res.centroids.row_span(c);
    auto src = data.row_span(pick);
    std::copy(src.begin(), src.end(), row.begin());
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], sqdist(data.row_span(i), row));
      total += d2[i];
    }
    if (c + 1 == k) break;
    pick = total > 0 ? rng.categorical(d2) : rng.uniform_index(n);
  }

  res.assignments.assign(n, k);
  for (std::size_t it = 0; it < max_iter; ++it) {
    bool changed = false;
    double obj = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a = nearest_row(res.centroids, data.row_span(i));
      changed |= a != res.assignments[i];
      res.assignments[i] = a;
      obj += sqdist(data.row_span(i), res.centroids.row_span(a));
    }
    res.objective.push_back(obj);
    if (!changed) break;
    Tensor sums({k, f});
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto s = sums.row_span(res.assignments[i]);
      auto x = data.row_span(i);
      for (std::size_t j = 0; j < f; ++j) s[j] += x[j];
      ++counts[res.assignments[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      auto dst = res.centroids.row_span(c);
      auto s = sums.row_span(c);
      for (std::size_t j = 0; j < f; ++j) dst[j] = s[j] / static_cast<double>(counts[c]);
    }
  }
  return res;
}

}  // namespace modeflow::vqtok
