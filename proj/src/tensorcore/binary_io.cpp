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

#include "modeflow/tensorcore/binary_io.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "modeflow/tensorcore/error.hpp"

namespace modeflow {

namespace {

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    T out;
    auto* src = reinterpret_cast<const unsigned char*>(&v);
    auto* dst = reinterpret_cast<unsigned char*>(&out);
    for (std::size_t i = 0; i < sizeof(T); ++i) dst[i] = src[sizeof(T) - 1 - i];
    return out;
  }
}

template <typename T>
void put(std::string& buf, T v) {
  v = to_little(v);
  char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  buf.append(bytes, sizeof(T));
}

template <typename T>
T get(std::string_view bytes, std::size_t pos) {
  T v;
  std::memcpy(&v, bytes.data() + pos, sizeof(T));
  return to_little(v);
}

constexpr std::uint32_t kMaxRank = 8;
constexpr std::uint64_t kMaxString = 1 << 20;

}  // namespace

void ByteWriter::u32(std::uint32_t v) { put(buf_, v); }
void ByteWriter::u64(std::uint64_t v) { put(buf_, v); }
void ByteWriter::f64(double v) { put(buf_, std::bit_cast<std::uint64_t>(v)); }
void ByteWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  buf_.append(s);
}
void ByteWriter::raw(std::string_view bytes) { buf_.append(bytes); }
void ByteWriter::f64s(std::span<const double> values) {
  for (double v : values) f64(v);
}
void ByteWriter::tensor(const Tensor& t) {
  u32(static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) u64(d);
  f64s(t.data());
}

void ByteReader::need(std::size_t n) const {
  if (remaining() < n) {
    throw FormatError("truncated input: needed " + std::to_string(n) + " bytes at offset " +
                      std::to_string(pos_) + ", " + std::to_string(remaining()) + " left");
  }
}

std::uint32_t ByteReader::u32() {
  need(4);
  auto v = get<std::uint32_t>(bytes_, pos_);
  pos_ += 4;
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  auto v = get<std::uint64_t>(bytes_, pos_);
  pos_ += 8;
  return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string ByteReader::str() {
  const auto n = u32();
  if (n > kMaxString) throw FormatError("string length " + std::to_string(n) + " is implausible");
  return raw(n);
}

std::string ByteReader::raw(std::size_t n) {
  need(n);
  std::string s(bytes_.substr(pos_, n));
  pos_ += n;
  return s;
}

std::vector<double> ByteReader::f64s(std::size_t n) {
  if (n > remaining() / 8) need(n * 8);
  std::vector<double> v(n);
  for (auto& x : v) x = f64();
  return v;
}

Tensor ByteReader::tensor() {
  const auto rank = u32();
  if (rank == 0 || rank > kMaxRank) throw FormatError("tensor rank " + std::to_string(rank) + " is invalid");
  Shape shape(rank);
  std::uint64_t numel = 1;
  for (auto& d : shape) {
    d = u64();
    if (d == 0 || d > remaining()) throw FormatError("tensor dimension is invalid");
    numel *= d;
    if (numel > remaining() / 8 + 1) need(numel * 8);
  }
  return Tensor(std::move(shape), f64s(numel));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, std::string_view bytes) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const auto tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("short write to " + tmp);
  }
  std::filesystem::rename(tmp, target);
}

}  // namespace modeflow
