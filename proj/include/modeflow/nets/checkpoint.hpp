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
#include <utility>
#include <vector>

#include "modeflow/nets/params.hpp"

namespace modeflow::nets {

// Named-tensor container. Layout (little-endian):
//   "MFCK" | u32 version | u32 n_meta | n_meta x (str key, str value)
//   | u64 n_records | n_records x (str name, u32 rank, rank x u64 dim, f64 data)
// Strings are a u32 byte length followed by the bytes.
inline constexpr char kCheckpointMagic[] = "MFCK";
inline constexpr std::uint32_t kCheckpointVersion = 1;

class Checkpoint {
 public:
  void set_meta(const std::string& key, const std::string& value);
  const std::string& meta(const std::string& key) const;
  bool has_meta(const std::string& key) const;

  void add(const std::string& name, const Tensor& value);
  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const;
  const std::vector<std::pair<std::string, Tensor>>& records() const { return records_; }

  // Stores every parameter as "<prefix><name>".
  void add_params(const std::string& prefix, const ParamStore& store);
  // Overwrites the values of `store` from "<prefix><name>" records; names and
  // shapes must match exactly.
  void load_params(const std::string& prefix, ParamStore& store) const;

  std::string serialize() const;
  static Checkpoint parse(std::string_view bytes);
  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

 private:
  std::vector<std::pair<std::string, std::string>> meta_;
  std::vector<std::pair<std::string, Tensor>> records_;
};

}  // namespace modeflow::nets
