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

#include "modeflow/cli/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <json.hpp>

#include "modeflow/tensorcore/error.hpp"

namespace modeflow::cli {

using nlohmann::json;

namespace {

struct Field {
  std::function<void(ExperimentConfig&, const json&)> set;
  std::function<json(const ExperimentConfig&)> get;
};

template <typename T>
Field field(T ExperimentConfig::*member) {
  Field f;
  f.set = [member](ExperimentConfig& c, const json& v) {
    if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ValidationError("expected a string");
      c.*member = v.get<std::string>();
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ValidationError("expected true or false");
      c.*member = v.get<bool>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ValidationError("expected a number");
      c.*member = v.get<double>();
    } else {
      if (!v.is_number_unsigned()) throw ValidationError("expected a non-negative integer");
      c.*member = static_cast<T>(v.get<std::uint64_t>());
    }
  };
  f.get = [member](const ExperimentConfig& c) { return json(c.*member); };
  return f;
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> f = {
      {"env", field(&ExperimentConfig::env)},
      {"data_seed", field(&ExperimentConfig::data_seed)},
      {"demos", field(&ExperimentConfig::demos)},
      {"chunk_len", field(&ExperimentConfig::chunk_len)},
      {"exec_len", field(&ExperimentConfig::exec_len)},
      {"tokenizer", field(&ExperimentConfig::tokenizer)},
      {"codes", field(&ExperimentConfig::codes)},
      {"latent", field(&ExperimentConfig::latent)},
      {"beta", field(&ExperimentConfig::beta)},
      {"vq_epochs", field(&ExperimentConfig::vq_epochs)},
      {"vq_lr", field(&ExperimentConfig::vq_lr)},
      {"ae_epochs", field(&ExperimentConfig::ae_epochs)},
      {"vq_seed", field(&ExperimentConfig::vq_seed)},
      {"kind", field(&ExperimentConfig::kind)},
      {"two_stage", field(&ExperimentConfig::two_stage)},
      {"solver", field(&ExperimentConfig::solver)},
      {"epochs", field(&ExperimentConfig::epochs)},
      {"warmup_epochs", field(&ExperimentConfig::warmup_epochs)},
      {"batch", field(&ExperimentConfig::batch)},
      {"lr", field(&ExperimentConfig::lr)},
      {"weight_decay", field(&ExperimentConfig::weight_decay)},
      {"equal_prob", field(&ExperimentConfig::equal_prob)},
      {"checkpoint_every", field(&ExperimentConfig::checkpoint_every)},
      {"seed", field(&ExperimentConfig::seed)},
      {"episodes", field(&ExperimentConfig::episodes)},
      {"eval_seed", field(&ExperimentConfig::eval_seed)},
      {"horizon", field(&ExperimentConfig::horizon)},
      {"workers", field(&ExperimentConfig::workers)},
  };
  return f;
}

void set_value(ExperimentConfig& c, const std::string& key, const json& v) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw ValidationError("config: unknown key '" + key + "'");
  try {
    it->second.set(c, v);
  } catch (const ValidationError& e) {
    throw ValidationError("config: key '" + key + "': " + e.what());
  }
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError("config: " + what);
}

}  // namespace

void validate(const ExperimentConfig& c) {
  require(c.env == "fork2d" || c.env == "bins", "env must be fork2d or bins");
  require(c.demos >= 1 && c.demos <= 100000, "demos must lie in [1, 100000]");
  require(c.chunk_len >= 1 && c.chunk_len <= 128, "chunk_len (T_p) must lie in [1, 128]");
  require(c.exec_len >= 1 && c.exec_len <= c.chunk_len, "exec_len (T_a) must lie in [1, T_p]");
  require(c.tokenizer == "vq" || c.tokenizer == "kmeans", "tokenizer must be vq or kmeans");
  require(c.codes >= 1 && c.codes <= 1024, "codes (K) must lie in [1, 1024]");
  require(c.latent >= 1 && c.latent <= 1024, "latent (D) must lie in [1, 1024]");
  require(c.beta > 0 && c.beta <= 10, "beta must lie in (0, 10]");
  require(c.vq_epochs >= 1, "vq_epochs must be positive");
  require(c.vq_lr > 0 && c.vq_lr <= 1, "vq_lr must lie in (0, 1]");
  policy::parse_kind(c.kind);
  policy::parse_solver(c.solver);
  require(c.epochs >= 1, "epochs must be positive");
  require(c.warmup_epochs < c.epochs, "warmup_epochs must be below epochs");
  require(c.batch >= 1 && c.batch <= 65536, "batch must lie in [1, 65536]");
  require(c.lr > 0 && c.lr <= 1, "lr must lie in (0, 1]");
  require(c.weight_decay >= 0 && c.weight_decay <= 1, "weight_decay must lie in [0, 1]");
  require(c.equal_prob >= 0 && c.equal_prob <= 1, "equal_prob must lie in [0, 1]");
  require(c.episodes >= 1, "episodes must be positive");
  require(c.horizon <= 100000, "horizon too large");
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config: not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("config: top level must be an object");
  ExperimentConfig c;
  for (const auto& [key, value] : j.items()) {
    if (value.is_object() || value.is_array() || value.is_null()) {
      throw ValidationError("config: key '" + key + "' must hold a scalar");
    }
    set_value(c, key, value);
  }
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("config file not found: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_json(const ExperimentConfig& c) {
  json j = json::object();
  for (const auto& [key, f] : fields()) j[key] = f.get(c);
  return j.dump(2) + "\n";
}

void set_key(ExperimentConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ValidationError("override '" + assignment + "' is not key=value");
  }
  const std::string key = assignment.substr(0, eq), raw = assignment.substr(eq + 1);
  const auto it = fields().find(key);
  if (it == fields().end()) throw ValidationError("config: unknown key '" + key + "'");
  // Strings go in verbatim; everything else is read as a JSON scalar.
  if (it->second.get(c).is_string()) {
    set_value(c, key, json(raw));
  } else {
    json v;
    try {
      v = json::parse(raw);
    } catch (const json::parse_error&) {
      throw ValidationError("config: key '" + key + "': cannot read '" + raw + "'");
    }
    set_value(c, key, v);
  }
}

synthenv::EnvSpec env_spec(const ExperimentConfig& c) {
  return c.env == "bins" ? synthenv::bins() : synthenv::fork2d();
}

vqtok::VqConfig vq_config(const ExperimentConfig& c) {
  vqtok::VqConfig v;
  v.chunk_len = c.chunk_len;
  v.action_dim = env_spec(c).action_dim;
  v.codes = c.codes;
  v.latent = c.latent;
  v.beta = c.beta;
  v.epochs = c.vq_epochs;
  v.lr = c.vq_lr;
  v.ae_epochs = c.ae_epochs;
  return v;
}

policy::PolicyConfig policy_config(const ExperimentConfig& c) {
  policy::PolicyConfig p;
  p.kind = policy::parse_kind(c.kind);
  p.chunk_len = c.chunk_len;
  p.action_dim = env_spec(c).action_dim;
  p.exec_len = c.exec_len;
  p.encoder.proprio_dim = env_spec(c).state_dim;
  p.two_stage = c.two_stage;
  p.solver = policy::parse_solver(c.solver);
  return p;
}

policy::TrainConfig train_config(const ExperimentConfig& c) {
  policy::TrainConfig t;
  t.epochs = c.epochs;
  t.batch = c.batch;
  t.lr = c.lr;
  t.weight_decay = c.weight_decay;
  t.warmup_epochs = c.warmup_epochs;
  t.equal_prob = c.equal_prob;
  return t;
}

}  // namespace modeflow::cli
