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
#include <string_view>
#include <vector>

namespace modeflow::cli {

std::string sha256_hex(std::string_view bytes);
std::string read_file(const std::string& path);  // MissingArtifactError if absent
void write_file(const std::string& path, std::string_view bytes);

struct ArtifactRecord {
  std::string path;  // relative to the output directory
  std::string sha256;
  std::size_t bytes = 0;
};

// Record of one command run: what was asked, what was written.
struct RunManifest {
  std::string command;
  std::string config;  // JSON echo
  std::vector<ArtifactRecord> artifacts;
  double seconds = 0.0;
  std::string tool_version;
};

// Writes `bytes` under `dir` and appends its digest to the manifest.
void write_artifact(RunManifest& m, const std::string& dir, const std::string& name,
                    std::string_view bytes);

std::string manifest_json(const RunManifest& m);
RunManifest parse_manifest(const std::string& json);

// Names of artifacts that are missing or whose digest differs; empty if the
// manifest holds.
std::vector<std::string> check_manifest(const RunManifest& m, const std::string& dir);

}  // namespace modeflow::cli
