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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "modeflow/policy/policy.hpp"
#include "modeflow/synthenv/dataset.hpp"

namespace modeflow::policy {

struct TrainConfig {
  std::size_t epochs = 150;
  std::size_t batch = 128;
  double lr = 1e-3;
  double weight_decay = 0.01;
  std::size_t warmup_epochs = 2;
  double equal_prob = 0.25;  // share of rows trained with tau = r
};

void validate(const TrainConfig& config);

// Per-epoch means. Terms a kind does not train stay zero.
struct EpochLoss {
  double total = 0.0;
  double classify = 0.0;    // cross-entropy of the primary mode policy
  double generate = 0.0;    // flow or regression term
  double accuracy = 0.0;    // primary mode accuracy against the VQ labels
};

struct TrainResult {
  Policy policy;
  std::vector<EpochLoss> curve;
};

using EpochHook = std::function<void(std::size_t epoch, const Policy& policy)>;

// Trains one policy kind on a dataset. Kinds that select modes need the
// frozen tokenizer; its labels supervise the primary mode policy and its
// prototypes define the residual targets.
TrainResult train_policy(const synthenv::Dataset& ds, const PolicyConfig& config,
                         std::optional<vqtok::Tokenizer> tokenizer, const TrainConfig& train,
                         Rng& rng, const EpochHook& hook = {});

// "epoch,total,classify,generate,accuracy" rows.
std::string loss_csv(const std::vector<EpochLoss>& curve);

}  // namespace modeflow::policy
