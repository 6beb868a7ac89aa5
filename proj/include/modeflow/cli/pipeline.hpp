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

#include <optional>
#include <string>
#include <vector>

#include "modeflow/cli/config.hpp"
#include "modeflow/control/metrics.hpp"

namespace modeflow::cli {

// In-memory pipeline stages shared by the commands and the acceptance run.
// Each stage draws from its own seed in the config, so stages can be rerun
// independently and reproduce byte-identical artifacts.

synthenv::Dataset make_dataset(const ExperimentConfig& c);

struct TokenizerRun {
  vqtok::Tokenizer tokenizer;
  std::vector<vqtok::VqLossTerms> curve;  // empty for k-means
};
TokenizerRun train_tokenizer(const ExperimentConfig& c, const synthenv::Dataset& ds);

// "epoch,reconstruction,codebook,commitment,total" rows.
std::string vq_curve_csv(const std::vector<vqtok::VqLossTerms>& curve);

// Trains the config's policy kind; kinds that select modes need `tok`.
policy::TrainResult train_bundle(const ExperimentConfig& c, const synthenv::Dataset& ds,
                                 const std::optional<vqtok::Tokenizer>& tok,
                                 const policy::EpochHook& hook = {});

// Evaluates with the config's episode count, seed, horizon and workers.
// Mode-less policies are labeled by `labeler_tok` (normalized with `stats`).
control::Evaluation evaluate_bundle(const ExperimentConfig& c, const policy::Policy& pol,
                                    const vqtok::Tokenizer* labeler_tok,
                                    const synthenv::NormStats& stats,
                                    const policy::ActOptions& options = {});

// Two leading principal components of the normalized chunks with their
// tokenizer codes: "pc1,pc2,mode,expert_mode".
std::string pca_csv(const synthenv::Dataset& ds, const vqtok::Tokenizer& tok);

}  // namespace modeflow::cli
