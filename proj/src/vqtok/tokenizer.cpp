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

#include "modeflow/vqtok/tokenizer.hpp"

#include "modeflow/tensorcore/error.hpp"

namespace modeflow::vqtok {

namespace {
constexpr const char* kVqMetaKeys[] = {"chunk_len", "action_dim", "codes", "latent",
                                       "hidden",    "beta",       "normalize_latent"};
}  // namespace

Tokenizer Tokenizer::from_vq(VqModel model) {
  Tokenizer t;
  t.kind_ = Kind::kVq;
  t.vq_ = std::move(model);
  return t;
}

Tokenizer Tokenizer::from_kmeans(Tensor centroids) {
  Tokenizer t;
  t.kind_ = Kind::kKMeans;
  t.centroids_ = std::move(centroids);
  return t;
}

std::size_t Tokenizer::modes() const {
  return kind_ == Kind::kVq ? vq_->config().codes : centroids_.rows();
}

std::size_t Tokenizer::flat() const {
  return kind_ == Kind::kVq ? vq_->config().flat() : centroids_.cols();
}

std::vector<std::size_t> Tokenizer::assign(const Tensor& chunks) const {
  if (kind_ == Kind::kVq) return vq_->assign(chunks);
  if (chunks.cols() != flat()) throw ShapeError("tokenizer: chunk width mismatch");
  std::vector<std::size_t> out(chunks.rows());
  for (std::size_t i = 0; i < chunks.rows(); ++i) out[i] = nearest_row(centroids_, chunks.row_span(i));
  return out;
}

Tensor Tokenizer::prototype(std::size_t mode) const {
  if (mode >= modes()) throw ValidationError("tokenizer: mode out of range");
  if (kind_ == Kind::kVq) {
    auto e = vq_->codebook().row_span(mode);
    return vq_->decode(Tensor::row({e.begin(), e.end()}));
  }
  auto c = centroids_.row_span(mode);
  return Tensor::row({c.begin(), c.end()});
}

Tensor Tokenizer::prototypes() const {
  if (kind_ == Kind::kVq) return vq_->decode(vq_->codebook());
  return centroids_;
}

void Tokenizer::write(nets::Checkpoint& ck, const std::string& prefix) const {
  if (kind_ == Kind::kVq) {
    ck.set_meta(prefix + "kind", "vq");
    const nets::Checkpoint inner = vq_->to_checkpoint();
    for (const char* k : kVqMetaKeys) ck.set_meta(prefix + k, inner.meta(k));
    for (const auto& [name, t] : inner.records()) ck.add(prefix + name, t);
  } else {
    ck.set_meta(prefix + "kind", "kmeans");
    ck.add(prefix + "centroids", centroids_);
  }
}

Tokenizer Tokenizer::read(const nets::Checkpoint& ck, const std::string& prefix) {
  const std::string kind = ck.meta(prefix + "kind");
  if (kind == "kmeans") return from_kmeans(ck.get(prefix + "centroids"));
  if (kind != "vq") throw FormatError("unknown tokenizer kind '" + kind + "'");
  nets::Checkpoint inner;
  inner.set_meta("kind", "vq");
  for (const char* k : kVqMetaKeys) inner.set_meta(k, ck.meta(prefix + k));
  for (const auto& [name, t] : ck.records()) {
    if (name.rfind(prefix, 0) == 0) inner.add(name.substr(prefix.size()), t);
  }
  return from_vq(VqModel::from_checkpoint(inner));
}

}  // namespace modeflow::vqtok
