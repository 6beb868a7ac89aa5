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

#include "modeflow/nets/checkpoint.hpp"

#include "modeflow/tensorcore/binary_io.hpp"
#include "modeflow/tensorcore/error.hpp"

namespace modeflow::nets {

void Checkpoint::set_meta(const std::string& key, const std::string& value) {
  for (auto& [k, v] : meta_) {
    if (k == key) {
      v = value;
      return;
    }
  }
  meta_.emplace_back(key, value);
}

bool Checkpoint::has_meta(const std::string& key) const {
  for (const auto& kv : meta_) {
    if (kv.first == key) return true;
  }
  return false;
}

const std::string& Checkpoint::meta(const std::string& key) const {
  for (const auto& kv : meta_) {
    if (kv.first == key) return kv.second;
  }
  throw FormatError("checkpoint has no metadata key '" + key + "'");
}

void Checkpoint::add(const std::string& name, const Tensor& value) {
  if (has(name)) throw ValidationError("duplicate checkpoint record " + name);
  records_.emplace_back(name, value);
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& r : records_) {
    if (r.first == name) return true;
  }
  return false;
}

const Tensor& Checkpoint::get(const std::string& name) const {
  for (const auto& r : records_) {
    if (r.first == name) return r.second;
  }
  throw FormatError("checkpoint has no record '" + name + "'");
}

void Checkpoint::add_params(const std::string& prefix, const ParamStore& store) {
  for (std::size_t i = 0; i < store.size(); ++i) add(prefix + store.name(i), store.value(i));
}

void Checkpoint::load_params(const std::string& prefix, ParamStore& store) const {
  for (std::size_t i = 0; i < store.size(); ++i) {
    const Tensor& t = get(prefix + store.name(i));
    if (t.shape() != store.value(i).shape()) {
      throw FormatError("checkpoint record " + prefix + store.name(i) + " has shape " +
                        shape_string(t.shape()) + ", expected " +
                        shape_string(store.value(i).shape()));
    }
    store.value(i) = t;
  }
}

std::string Checkpoint::serialize() const {
  ByteWriter w;
  w.raw(std::string_view(kCheckpointMagic, 4));
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(meta_.size()));
  for (const auto& [k, v] : meta_) {
    w.str(k);
    w.str(v);
  }
  w.u64(records_.size());
  for (const auto& [name, t] : records_) {
    w.str(name);
    w.tensor(t);
  }
  return w.take();
}

Checkpoint Checkpoint::parse(std::string_view bytes) {
  ByteReader r(bytes);
  if (bytes.size() < 4 || r.raw(4) != std::string_view(kCheckpointMagic, 4)) {
    throw FormatError("not a checkpoint file (bad magic)");
  }
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw VersionError("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                       std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint ck;
  const auto n_meta = r.u32();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    auto k = r.str();
    auto v = r.str();
    ck.set_meta(k, v);
  }
  const auto n = r.u64();
  for (std::uint64_t i = 0; i < n; ++i) {
    auto name = r.str();
    ck.add(name, r.tensor());
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after checkpoint records");
  return ck;
}

void Checkpoint::save(const std::string& path) const { write_file(path, serialize()); }

Checkpoint Checkpoint::load(const std::string& path) { return parse(read_file(path)); }

}  // namespace modeflow::nets
