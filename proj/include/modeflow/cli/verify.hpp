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
#include <optional>
#include <string>
#include <vector>

namespace modeflow::cli {

// One named check with the measured value and the bound it must respect.
struct CheckLine {
  std::string suite, name;
  double value = 0.0, bound = 0.0;
  bool pass = false;
};

struct VerifyReport {
  std::vector<CheckLine> lines;
  bool ok() const;
  std::vector<std::string> failures() const;  // "suite/name"
  std::string text() const;
};

struct VerifyOptions {
  std::uint64_t seed = 2024;
  std::size_t networks = 100;  // random networks in the gradient suite
  std::size_t op_trials = 10;  // random instances per primitive op
  std::size_t joints = 50;     // random joints in the variance suites
  // Op name (as printed by op_name) whose reverse rule is perturbed for the
  // duration of the run, to show that the suite catches it.
  std::optional<std::string> fault_op;
};

// Gradient and JVP checks of every primitive op and of random networks
// against central differences (relative error < 1e-4, duality < 1e-8).
VerifyReport gradient_suite(const VerifyOptions& o);
// Variance identity and classifier trade-off on random enumerable joints.
VerifyReport variance_suite(const VerifyOptions& o);
// MeanFlow target degeneracies (zero interval, constant field).
VerifyReport meanflow_suite(const VerifyOptions& o);

VerifyReport run_verify(const VerifyOptions& o);

}  // namespace modeflow::cli
