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

#include <cstdint>
#include <string>
#include <vector>

#include "modeflow/synthenv/env.hpp"

namespace modeflow::synthenv {

// One successful expert episode of length L.
struct Demonstration {
  Tensor proprio;        // [L, d_s], state before each action
  Tensor actions;        // [L, d_a], executed actions
  std::uint32_t mode = 0;  // expert mode tag, diagnostics only
  std::size_t length() const { return actions.rows(); }
  friend bool operator==(const Demonstration&, const Demonstration&) = default;
};

// Per-dimension z-score statistics. Action statistics are pooled over time.
struct NormStats {
  std::vector<double> proprio_mean, proprio_std;
  std::vector<double> action_mean, action_std;
  friend bool operator==(const NormStats&, const NormStats&) = default;
};

struct Dataset {
  EnvSpec env;
  std::size_t chunk_len = 16;  // T_p
  Tensor points;               // [point_count, 3], shared by every step
  std::vector<Demonstration> demos;
  NormStats stats;

  std::size_t steps() const;
  // Label of step t of demo d: actions[t, t + T_p) padded by holding the
  // last action. [T_p, d_a]
  Tensor chunk(std::size_t demo, std::size_t t) const;
};

// Reference to one training sample.
struct StepRef {
  std::size_t demo, t;
};
std::vector<StepRef> all_steps(const Dataset& ds);

// Demonstrations with modes drawn from `mode_weights`; demo i uses the
// stream Rng::stream(seed, i). Throws if an expert episode fails.
Dataset generate_demos(const EnvSpec& env, std::size_t n, std::uint64_t seed,
                       const std::vector<double>& mode_weights, std::size_t chunk_len);

NormStats compute_stats(const EnvSpec& env, const std::vector<Demonstration>& demos);

std::vector<double> normalize_proprio(const NormStats& s, std::span<const double> x);
std::vector<double> denormalize_proprio(const NormStats& s, std::span<const double> x);
// Row-wise over [T, d_a].
Tensor normalize_actions(const NormStats& s, const Tensor& chunk);
Tensor denormalize_actions(const NormStats& s, const Tensor& chunk);

// Binary container, little-endian:
//   "MFDS" | u32 version | str env | u64 n | u64 T_p | u64 d_a | u64 d_s
//   | u64 point_count | f64 points | n x (u64 L, u32 mode, f64 proprio,
//   f64 actions) | stats (4 x f64 arrays) | u64 n (trailer)
inline constexpr std::uint32_t kDatasetVersion = 1;
std::string serialize_dataset(const Dataset& ds);
Dataset parse_dataset(std::string_view bytes);
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

// One row per timestep: demo,t,mode,x,y,vx,vy,ax,ay
std::string dataset_csv(const Dataset& ds);

}  // namespace modeflow::synthenv
