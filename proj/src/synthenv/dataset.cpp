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

#include "modeflow/synthenv/dataset.hpp"

#include <cmath>
#include <sstream>

#include "modeflow/synthenv/expert.hpp"
#include "modeflow/tensorcore/binary_io.hpp"
#include "modeflow/tensorcore/error.hpp"
#include "modeflow/tensorcore/rng.hpp"

namespace modeflow::synthenv {

std::size_t Dataset::steps() const {
  std::size_t n = 0;
  for (const auto& d : demos) n += d.length();
  return n;
}

Tensor Dataset::chunk(std::size_t demo, std::size_t t) const {
  const auto& a = demos.at(demo).actions;
  if (t >= a.rows()) throw ValidationError("chunk index beyond demonstration length");
  const std::size_t da = a.cols();
  Tensor out({chunk_len, da});
  for (std::size_t k = 0; k < chunk_len; ++k) {
    const std::size_t src = std::min(t + k, a.rows() - 1);
    for (std::size_t c = 0; c < da; ++c) out.at(k, c) = a.at(src, c);
  }
  return out;
}

std::vector<StepRef> all_steps(const Dataset& ds) {
  std::vector<StepRef> out;
  for (std::size_t d = 0; d < ds.demos.size(); ++d) {
    for (std::size_t t = 0; t < ds.demos[d].length(); ++t) out.push_back({d, t});
  }
  return out;
}

Dataset generate_demos(const EnvSpec& env, std::size_t n, std::uint64_t seed,
                       const std::vector<double>& mode_weights, std::size_t chunk_len) {
  if (n == 0) throw ValidationError("number of demonstrations must be positive");
  if (chunk_len == 0) throw ValidationError("chunk length must be positive");
  if (mode_weights.size() != env.modes) {
    throw ValidationError("expected " + std::to_string(env.modes) + " mode weights for " + env.name);
  }
  double total = 0.0;
  for (double w : mode_weights) {
    if (!(w >= 0.0)) throw ValidationError("mode weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("mode weights must sum to 1");

  Dataset ds;
  ds.env = env;
  ds.chunk_len = chunk_len;
  ds.points = scene_points(env);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng::stream(seed, i);
    const std::size_t mode = rng.categorical(mode_weights);
    const ExpertStyle style = sample_style(rng);
    const double jx = env.start_jitter * rng.normal();
    const double jy = env.start_jitter * rng.normal();
    EnvState s = initial_state(env, jx, jy);
    const Tensor plan = expert_plan(env, s, mode, style, env.horizon);

    std::vector<double> prop, act;
    std::size_t len = 0;
    while (len < env.horizon && !s.terminal()) {
      const auto p = proprio(s);
      prop.insert(prop.end(), p.begin(), p.end());
      const Vec2 a{plan.at(len, 0), plan.at(len, 1)};
      act.insert(act.end(), a.begin(), a.end());
      s = step(env, s, a);
      ++len;
    }
    if (!s.succeeded) {
      throw ValidationError("expert demonstration " + std::to_string(i) + " did not succeed");
    }
    Demonstration d;
    d.proprio = Tensor::matrix(len, env.state_dim, std::move(prop));
    d.actions = Tensor::matrix(len, env.action_dim, std::move(act));
    d.mode = static_cast<std::uint32_t>(mode);
    ds.demos.push_back(std::move(d));
  }
  ds.stats = compute_stats(env, ds.demos);
  return ds;
}

namespace {

void moments(const std::vector<const Tensor*>& blocks, std::size_t dim, std::vector<double>& mean,
             std::vector<double>& stddev) {
  mean.assign(dim, 0.0);
  stddev.assign(dim, 0.0);
  double count = 0;
  for (const auto* b : blocks) {
    for (std::size_t r = 0; r < b->rows(); ++r) {
      for (std::size_t c = 0; c < dim; ++c) mean[c] += b->at(r, c);
      count += 1;
    }
  }
  for (auto& m : mean) m /= count;
  for (const auto* b : blocks) {
    for (std::size_t r = 0; r < b->rows(); ++r) {
      for (std::size_t c = 0; c < dim; ++c) {
        const double d = b->at(r, c) - mean[c];
        stddev[c] += d * d;
      }
    }
  }
  for (auto& s : stddev) {
    s = std::sqrt(s / count);
    if (s < 1e-8) s = 1.0;
  }
}

}  // namespace

NormStats compute_stats(const EnvSpec& env, const std::vector<Demonstration>& demos) {
  if (demos.empty()) throw ValidationError("cannot compute statistics of an empty split");
  std::vector<const Tensor*> props, acts;
  for (const auto& d : demos) {
    props.push_back(&d.proprio);
    acts.push_back(&d.actions);
  }
  NormStats s;
  moments(props, env.state_dim, s.proprio_mean, s.proprio_std);
  moments(acts, env.action_dim, s.action_mean, s.action_std);
  return s;
}

std::vector<double> normalize_proprio(const NormStats& s, std::span<const double> x) {
  if (x.size() != s.proprio_mean.size()) throw ShapeError("proprio width mismatch");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - s.proprio_mean[i]) / s.proprio_std[i];
  return out;
}

std::vector<double> denormalize_proprio(const NormStats& s, std::span<const double> x) {
  if (x.size() != s.proprio_mean.size()) throw ShapeError("proprio width mismatch");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * s.proprio_std[i] + s.proprio_mean[i];
  return out;
}

Tensor normalize_actions(const NormStats& s, const Tensor& chunk) {
  if (chunk.cols() != s.action_mean.size()) throw ShapeError("action width mismatch");
  Tensor out = chunk;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < out.cols(); ++c) {
      out.at(r, c) = (out.at(r, c) - s.action_mean[c]) / s.action_std[c];
    }
  }
  return out;
}

Tensor denormalize_actions(const NormStats& s, const Tensor& chunk) {
  if (chunk.cols() != s.action_mean.size()) throw ShapeError("action width mismatch");
  Tensor out = chunk;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < out.cols(); ++c) {
      out.at(r, c) = out.at(r, c) * s.action_std[c] + s.action_mean[c];
    }
  }
  return out;
}

std::string serialize_dataset(const Dataset& ds) {
  ByteWriter w;
  w.raw("MFDS");
  w.u32(kDatasetVersion);
  w.str(ds.env.name);
  w.u64(ds.demos.size());
  w.u64(ds.chunk_len);
  w.u64(ds.env.action_dim);
  w.u64(ds.env.state_dim);
  w.u64(ds.env.point_count);
  w.f64s(ds.points.data());
  for (const auto& d : ds.demos) {
    w.u64(d.length());
    w.u32(d.mode);
    w.f64s(d.proprio.data());
    w.f64s(d.actions.data());
  }
  for (const auto* v : {&ds.stats.proprio_mean, &ds.stats.proprio_std, &ds.stats.action_mean,
                        &ds.stats.action_std}) {
    w.f64s(*v);
  }
  w.u64(ds.demos.size());
  return w.take();
}

Dataset parse_dataset(std::string_view bytes) {
  ByteReader r(bytes);
  if (bytes.size() < 4 || r.raw(4) != "MFDS") throw FormatError("not a dataset file (bad magic)");
  const auto version = r.u32();
  if (version != kDatasetVersion) {
    throw VersionError("dataset version " + std::to_string(version) + " unsupported (expected " +
                       std::to_string(kDatasetVersion) + ")");
  }
  Dataset ds;
  ds.env = make_env(r.str());
  const auto n = r.u64();
  ds.chunk_len = r.u64();
  const auto da = r.u64(), dsz = r.u64(), pc = r.u64();
  if (da != ds.env.action_dim || dsz != ds.env.state_dim || pc != ds.env.point_count) {
    throw FormatError("dataset header dimensions do not match environment " + ds.env.name);
  }
  if (ds.chunk_len == 0) throw FormatError("dataset header has zero chunk length");
  ds.points = Tensor::matrix(pc, 3, r.f64s(pc * 3));
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto len = r.u64();
    if (len == 0 || len > ds.env.horizon) throw FormatError("dataset record has invalid length");
    Demonstration d;
    d.mode = r.u32();
    if (d.mode >= ds.env.modes) throw FormatError("dataset record has invalid mode tag");
    d.proprio = Tensor::matrix(len, dsz, r.f64s(len * dsz));
    d.actions = Tensor::matrix(len, da, r.f64s(len * da));
    ds.demos.push_back(std::move(d));
  }
  ds.stats.proprio_mean = r.f64s(dsz);
  ds.stats.proprio_std = r.f64s(dsz);
  ds.stats.action_mean = r.f64s(da);
  ds.stats.action_std = r.f64s(da);
  const auto trailer = r.u64();
  if (trailer != n || ds.demos.size() != n) {
    throw FormatError("dataset record count " + std::to_string(trailer) +
                      " disagrees with header count " + std::to_string(n));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after dataset");
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
  write_file(path, serialize_dataset(ds));
}

Dataset load_dataset(const std::string& path) { return parse_dataset(read_file(path)); }

std::string dataset_csv(const Dataset& ds) {
  std::ostringstream out;
  out.precision(17);
  out << "demo,t,mode,x,y,vx,vy,ax,ay\n";
  for (std::size_t d = 0; d < ds.demos.size(); ++d) {
    const auto& demo = ds.demos[d];
    for (std::size_t t = 0; t < demo.length(); ++t) {
      out << d << ',' << t << ',' << demo.mode;
      for (std::size_t c = 0; c < 4; ++c) out << ',' << demo.proprio.at(t, c);
      out << ',' << demo.actions.at(t, 0) << ',' << demo.actions.at(t, 1) << '\n';
    }
  }
  return out.str();
}

}  // namespace modeflow::synthenv
