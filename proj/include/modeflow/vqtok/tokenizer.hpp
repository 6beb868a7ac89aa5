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

#include "modeflow/vqtok/vqvae.hpp"

namespace modeflow::vqtok {

// Maps flattened normalized chunks to discrete modes and back to prototype
// chunks. Backed either by a trained VQ-VAE (prototype = decoder output of
// the code vector) or by k-means centroids over raw chunks.
class Tokenizer {
 public:
  enum class Kind { kVq, kKMeans };

  Tokenizer() = default;
  static Tokenizer from_vq(VqModel model);
  static Tokenizer from_kmeans(Tensor centroids);

  Kind kind() const { return kind_; }
  std::size_t modes() const;
  std::size_t flat() const;
  std::vector<std::size_t> assign(const Tensor& chunks) const;
  // [1, F]; one decoder evaluation for the VQ kind.
  Tensor prototype(std::size_t mode) const;
  // [K, F], all prototypes at once.
  Tensor prototypes() const;
  const VqModel& vq() const { return *vq_; }

  void write(nets::Checkpoint& ck, const std::string& prefix) const;
  static Tokenizer read(const nets::Checkpoint& ck, const std::string& prefix);

 private:
  Kind kind_ = Kind::kVq;
  std::optional<VqModel> vq_;
  Tensor centroids_;
};

}  // namespace modeflow::vqtok
