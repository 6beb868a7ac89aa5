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

#include "modeflow/cli/manifest.hpp"

#include <openssl/evp.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "modeflow/tensorcore/error.hpp"

namespace modeflow::cli {

using nlohmann::json;

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256: digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("missing artifact: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view bytes) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  // Write to a sibling and rename so a failed run never leaves a torn file.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("cannot write " + path);
  }
  std::filesystem::rename(tmp, path);
}

void write_artifact(RunManifest& m, const std::string& dir, const std::string& name,
                    std::string_view bytes) {
  write_file((std::filesystem::path(dir) / name).string(), bytes);
  m.artifacts.push_back({name, sha256_hex(bytes), bytes.size()});
}

std::string manifest_json(const RunManifest& m) {
  json j;
  j["tool"] = "modeflow";
  j["tool_version"] = m.tool_version;
  j["command"] = m.command;
  j["config"] = json::parse(m.config.empty() ? "{}" : m.config);
  j["seconds"] = m.seconds;
  j["artifacts"] = json::array();
  for (const auto& a : m.artifacts) {
    j["artifacts"].push_back({{"path", a.path}, {"sha256", a.sha256}, {"bytes", a.bytes}});
  }
  return j.dump(2) + "\n";
}

RunManifest parse_manifest(const std::string& text) {
  try {
    const json j = json::parse(text);
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.tool_version = j.at("tool_version").get<std::string>();
    m.config = j.at("config").dump();
    m.seconds = j.at("seconds").get<double>();
    for (const auto& a : j.at("artifacts")) {
      m.artifacts.push_back({a.at("path").get<std::string>(), a.at("sha256").get<std::string>(),
                             a.at("bytes").get<std::size_t>()});
    }
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
}

std::vector<std::string> check_manifest(const RunManifest& m, const std::string& dir) {
  std::vector<std::string> bad;
  for (const auto& a : m.artifacts) {
    const auto path = (std::filesystem::path(dir) / a.path).string();
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      bad.push_back(a.path);
      continue;
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    if (sha256_hex(ss.str()) != a.sha256) bad.push_back(a.path);
  }
  return bad;
}

}  // namespace modeflow::cli
