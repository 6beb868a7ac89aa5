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
#include <string>
#include <vector>

#include "modeflow/synthenv/dataset.hpp"
#include "modeflow/tensorcore/rng.hpp"

namespace modeflow::analysis {

// One support point (o, m, a) of a finite joint distribution.
struct Atom {
  std::size_t o = 0, m = 0;
  std::vector<double> a;
  double p = 0.0;
};

// Finite joint over (observation, mode, action). Probabilities sum to 1
// within 1e-12, actions share one dimension, at most 10^4 atoms.
struct DiscreteJoint {
  std::vector<Atom> atoms;
};

void validate(const DiscreteJoint& joint);

// Random joint with `obs` observations, up to `modes` modes per
// observation, `actions` action atoms per (o, m) and action dimension `dim`.
// Mode means are spread apart so that v_inter > 0 almost surely.
DiscreteJoint random_joint(Rng& rng, std::size_t obs, std::size_t modes, std::size_t actions,
                           std::size_t dim);

struct Decomposition {
  double total = 0.0;       // E_o Var(a | o)
  double v_intra = 0.0;     // E_{o,m} Var(a | o, m)
  double v_inter = 0.0;     // E_o Var_{m|o} E[a | o, m]
  double e_classify = 0.0;  // only filled by mse_bounds
};

// Exact enumeration of the conditional moments. Throws ValidationError if
// an (o, m) slice present in the support carries zero probability.
Decomposition decompose(const DiscreteJoint& joint);

// Mode chosen for a sample with observation o and true mode m. A classifier
// that ignores m sees only the observation; the identity is perfect.
using Classifier = std::function<std::size_t(std::size_t o, std::size_t m)>;

struct MseBounds {
  double l_single = 0.0;    // E|a - E[a|o]|^2, the best single-stage regressor
  double l_pfdag = 0.0;     // E|a - mu_{m_hat}(o)|^2 with exact per-mode means
  double e_classify = 0.0;  // E_{o,m} |mu_m(o) - mu_{m_hat}(o)|^2
  Decomposition parts;      // with e_classify set
};

// Both losses are enumerated directly from their definitions and
// e_classify from its own sum, so l_pfdag = v_intra + e_classify and
// l_single = total are checks, not identities by construction. Throws if
// the classifier picks a mode absent at o.
MseBounds mse_bounds(const DiscreteJoint& joint, const Classifier& classifier);

// Same bounds for a stochastic classifier that keeps the true mode with
// probability 1 - rho and otherwise picks one of the other modes present
// at o uniformly; enumerated exactly over the flip outcomes.
MseBounds mse_bounds_flipped(const DiscreteJoint& joint, double rho);

// E|a - f(o)|^2 for a deterministic predictor.
double predictor_mse(const DiscreteJoint& joint,
                     const std::function<std::vector<double>(std::size_t o)>& predictor);

// Equal-weight samples for the empirical decomposition.
struct Sample {
  std::size_t key = 0;  // observation bin
  std::size_t mode = 0;
  std::vector<double> a;
};

// Sample moments (1/n normalization) with observations binned by `key`.
// Throws ValidationError if any (key, mode) bin holds fewer than 2 samples.
Decomposition empirical_decompose(const std::vector<Sample>& samples);

// Action taken at step t of every demo that is long enough, tagged with the
// expert mode; all share key 0 (fork2d has one nominal start observation).
std::vector<Sample> step_samples(const synthenv::Dataset& ds, std::size_t t);

std::string decomposition_csv_header();
std::string decomposition_csv_row(const std::string& label, const Decomposition& d);
std::string decomposition_summary(const Decomposition& d);

}  // namespace modeflow::analysis
