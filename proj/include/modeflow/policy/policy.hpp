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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "modeflow/nets/checkpoint.hpp"
#include "modeflow/nets/mlp.hpp"
#include "modeflow/nets/obs_encoder.hpp"
#include "modeflow/nets/params.hpp"
#include "modeflow/policy/field.hpp"
#include "modeflow/policy/ode.hpp"
#include "modeflow/synthenv/dataset.hpp"
#include "modeflow/vqtok/tokenizer.hpp"

namespace modeflow::policy {

enum class PolicyKind { kPfdag, kBc, kCfm, kMeanflowSingle, kVqOnly };

std::string kind_name(PolicyKind kind);
PolicyKind parse_kind(const std::string& name);

struct PolicyConfig {
  PolicyKind kind = PolicyKind::kPfdag;
  std::size_t chunk_len = 16;  // T_p
  std::size_t action_dim = 2;
  std::size_t exec_len = 8;    // T_a
  nets::ObsEncoderConfig encoder;
  FieldConfig field;            // flat, obs_dim and modes are derived
  std::size_t head_hidden = 128;
  // cfm only: true models the residual over the selected prototype (same
  // targets as pfdag), false models the whole chunk from the observation.
  bool two_stage = true;
  Solver solver = Solver::euler(10);  // cfm sampling
  std::size_t flat() const { return chunk_len * action_dim; }
};

void validate(const PolicyConfig& config);

// Whether the kind selects a discrete mode with the primary mode policy.
bool selects_mode(const PolicyConfig& config);
bool has_field(const PolicyConfig& config);

// One chunk emitted by a policy.
struct Action {
  Tensor chunk;                     // [T_p, d_a], environment units
  Tensor normalized;                // [1, T_p * d_a]
  std::optional<std::size_t> mode;  // selected primary mode, if any
  std::size_t field_evals = 0;
  std::size_t classifier_evals = 0;
  std::size_t decoder_evals = 0;
};

// Trained policy of any kind: parameters, the frozen tokenizer (kinds that
// select modes), normalization statistics and the scene point set. Immutable
// once trained; every const member may be called concurrently.
class Policy {
 public:
  Policy() = default;
  Policy(const PolicyConfig& config, std::optional<vqtok::Tokenizer> tokenizer,
         synthenv::NormStats stats, Tensor points, Rng& rng);

  const PolicyConfig& config() const { return config_; }
  PolicyKind kind() const { return config_.kind; }
  const nets::ParamStore& params() const { return store_; }
  nets::ParamStore& params() { return store_; }
  const std::optional<vqtok::Tokenizer>& tokenizer() const { return tokenizer_; }
  const synthenv::NormStats& stats() const { return stats_; }
  const Tensor& points() const { return points_; }
  const FieldConfig& field_config() const { return field_.config(); }

  // Observation batch from raw proprio rows [B, d_s].
  nets::ObsBatch observe(const Tensor& raw_proprio) const;
  nets::ObsBatch observe_normalized(Tensor proprio) const;

  // Graph pieces.
  Var embed(const nets::BoundParams& p, const nets::ObsBatch& obs) const;
  Var pm_logits(const nets::BoundParams& p, Var embedding) const;
  Var field(const nets::BoundParams& p, Var z, Var tau, Var r, Var embedding,
            const std::vector<std::size_t>& modes) const;
  Var regress(const nets::BoundParams& p, Var embedding) const;

  // Evaluated pieces for one or more rows.
  Tensor embedding(const Tensor& raw_proprio) const;
  Tensor pm_logits(const Tensor& embedding) const;
  Tensor field(const Tensor& z, double tau, double r, const Tensor& embedding,
               const std::vector<std::size_t>& modes) const;

  nets::Checkpoint to_checkpoint() const;
  // Throws ValidationError if the stored kind differs from `expected`.
  static Policy from_checkpoint(const nets::Checkpoint& ck, std::optional<PolicyKind> expected);

 private:
  PolicyConfig config_;
  nets::ParamStore store_;
  nets::ObsEncoder encoder_;
  nets::Mlp pm_, regressor_;
  VelocityField field_;
  std::optional<vqtok::Tokenizer> tokenizer_;
  synthenv::NormStats stats_;
  Tensor points_;
};

// Argmax, ties to the lowest index.
std::size_t pm_select(std::span<const double> logits);

// Softmax of one row of logits.
std::vector<double> mode_probabilities(std::span<const double> logits);

// One-step residual: z0 ~ N(0, I), dx = z0 - v(z0, 0, 1; o, m). [1, F]
Tensor sample_residual(const Policy& policy, const Tensor& embedding, std::optional<std::size_t> mode,
                       Rng& rng, std::size_t* field_evals = nullptr);

struct ActOptions {
  bool zero_residual = false;            // prototype replay for pfdag
  std::optional<Solver> solver;          // overrides the cfm solver
};

// Kind-specific inference from a raw proprio vector.
Action pfdag_act(const Policy& policy, std::span<const double> proprio, Rng& rng,
                 bool zero_residual = false);
Action cfm_sample(const Policy& policy, std::span<const double> proprio, Rng& rng,
                  const Solver& solver);
Action bc_act(const Policy& policy, std::span<const double> proprio);
Action meanflow_single_act(const Policy& policy, std::span<const double> proprio, Rng& rng);
Action vq_only_act(const Policy& policy, std::span<const double> proprio);

// Dispatch on the policy kind.
Action act(const Policy& policy, std::span<const double> proprio, Rng& rng,
           const ActOptions& options = {});

}  // namespace modeflow::policy
