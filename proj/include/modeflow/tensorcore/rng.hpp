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

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "modeflow/tensorcore/tensor.hpp"

namespace modeflow {

// xoshiro256** seeded through splitmix64. Normals use the Box-Muller
// transform and cache the second variate, so a given seed yields the same
// stream on every conforming platform. std::shuffle and <random>
// distributions are avoided because their algorithms are implementation
// defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  // Independent stream for rollout / worker `index` derived from `seed`.
  static Rng stream(std::uint64_t seed, std::uint64_t index);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer on [0, n). Uses rejection to avoid modulo bias.
  std::size_t uniform_index(std::size_t n);
  double normal();
  std::size_t categorical(std::span<const double> weights);

  Tensor normal_tensor(Shape shape);
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[uniform_index(i)]);
    }
  }

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
  std::optional<double> cached_normal_;
};

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace modeflow
