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

#include <cstddef>
#include <cstdint>
#include <string>

#include "modeflow/policy/train.hpp"
#include "modeflow/vqtok/vqvae.hpp"

namespace modeflow::cli {

// Every knob of one experiment. Stored as a flat JSON object whose keys are
// exactly the field names below; unknown keys and non-scalar values are
// rejected.
struct ExperimentConfig {
  std::string env = "fork2d";      // fork2d | bins
  std::uint64_t data_seed = 7;
  std::size_t demos = 200;
  std::size_t chunk_len = 16;      // T_p
  std::size_t exec_len = 8;        // T_a

  std::string tokenizer = "vq";    // vq | kmeans
  std::size_t codes = 2;           // K
  std::size_t latent = 64;         // D
  double beta = 0.25;
  std::size_t vq_epochs = 12;
  double vq_lr = 1e-4;
  std::size_t ae_epochs = 5;
  std::uint64_t vq_seed = 1;

  std::string kind = "pfdag";      // pfdag | bc | cfm | meanflow-single | vq-only
  bool two_stage = true;           // cfm only
  std::string solver = "euler10";  // cfm sampling: eulerN | dopri5
  std::size_t epochs = 150;
  std::size_t warmup_epochs = 2;
  std::size_t batch = 128;
  double lr = 1e-3;
  double weight_decay = 0.01;
  double equal_prob = 0.25;
  std::size_t checkpoint_every = 0;  // 0 keeps only the final bundle
  std::uint64_t seed = 3;

  std::size_t episodes = 20;
  std::uint64_t eval_seed = 11;
  std::size_t horizon = 0;         // 0 uses the environment horizon
  std::size_t workers = 0;         // 0 uses every hardware thread
};

// Generous sanity ranges around the usual settings (T_p up to 128, K up to
// 1024, T_a <= T_p, ...); violations throw ValidationError.
void validate(const ExperimentConfig& c);

// Overrides the defaults with the keys present in `json`. Throws
// ValidationError on unknown keys, wrong value types or invalid values.
ExperimentConfig parse_config(const std::string& json);
ExperimentConfig load_config(const std::string& path);
// Every key, sorted, two-space indented.
std::string config_json(const ExperimentConfig& c);
// Applies one "key=value" override with the same typing rules as the file.
void set_key(ExperimentConfig& c, const std::string& assignment);

synthenv::EnvSpec env_spec(const ExperimentConfig& c);
vqtok::VqConfig vq_config(const ExperimentConfig& c);
policy::PolicyConfig policy_config(const ExperimentConfig& c);
policy::TrainConfig train_config(const ExperimentConfig& c);

}  // namespace modeflow::cli
