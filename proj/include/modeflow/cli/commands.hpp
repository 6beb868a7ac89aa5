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

#include <string>
#include <vector>

namespace modeflow::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitVerification = 3;
inline constexpr int kExitMissingArtifact = 4;

// Environment variable naming the output root when --out is absent.
inline constexpr char kOutEnv[] = "MODEFLOW_OUT";

// Artifact names under the output directory.
inline constexpr char kDatasetFile[] = "dataset.mfds";
inline constexpr char kVqFile[] = "vq.mfck";
std::string policy_file(const std::string& kind);  // policy-<kind>.mfck
std::string losses_file(const std::string& kind);  // losses-<kind>.csv

// Every policy kind, in the order used by comparison tables.
const std::vector<std::string>& all_kinds();

// Parses `args` (without the program name), runs the verb and maps errors to
// exit codes. Diagnostics go to stderr, reports to stdout.
int run_cli(const std::vector<std::string>& args);

}  // namespace modeflow::cli
