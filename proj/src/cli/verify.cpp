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

#include "modeflow/cli/verify.hpp"

#include <cmath>
#include <cstdio>
#include <functional>

#include "modeflow/analysis/decompose.hpp"
#include "modeflow/policy/field.hpp"
#include "modeflow/tensorcore/error.hpp"
#include "modeflow/tensorcore/gradcheck.hpp"
#include "modeflow/tensorcore/graph.hpp"

namespace modeflow::cli {

bool VerifyReport::ok() const {
  for (const auto& l : lines) {
    if (!l.pass) return false;
  }
  return !lines.empty();
}

std::vector<std::string> VerifyReport::failures() const {
  std::vector<std::string> out;
  for (const auto& l : lines) {
    if (!l.pass) out.push_back(l.suite + "/" + l.name);
  }
  return out;
}

std::string VerifyReport::text() const {
  std::string out;
  char buf[256];
  for (const auto& l : lines) {
    std::snprintf(buf, sizeof buf, "%-4s %-10s %-36s %.3e (bound %.1e)\n", l.pass ? "ok" : "FAIL",
                  l.suite.c_str(), l.name.c_str(), l.value, l.bound);
    out += buf;
  }
  return out;
}

namespace {

void append(VerifyReport& dst, const VerifyReport& src) {
  dst.lines.insert(dst.lines.end(), src.lines.begin(), src.lines.end());
}

// value < bound passes; NaN never does.
CheckLine below(std::string suite, std::string name, double value, double bound) {
  return {std::move(suite), std::move(name), value, bound, value < bound};
}

Tensor random(Rng& rng, Shape shape, double scale = 1.0) {
  Tensor t = rng.normal_tensor(std::move(shape));
  for (auto& v : t.data()) v *= scale;
  return t;
}

struct OpCase {
  const char* name;
  GraphBuilder build;
  std::vector<Shape> shapes;
};

std::vector<OpCase> op_cases() {
  using S = std::span<const Var>;
  return {
      {"matmul", [](Graph& g, S v) { return g.matmul(v[0], v[1]); }, {{3, 4}, {4, 2}}},
      {"add", [](Graph& g, S v) { return g.add(v[0], v[1]); }, {{3, 4}, {1, 4}}},
      {"sub", [](Graph& g, S v) { return g.sub(v[0], v[1]); }, {{3, 4}, {1}}},
      {"mul", [](Graph& g, S v) { return g.mul(v[0], v[1]); }, {{3, 4}, {3, 1}}},
      {"scale", [](Graph& g, S v) { return g.scale(v[0], -1.7); }, {{2, 3}}},
      {"gelu", [](Graph& g, S v) { return g.gelu(v[0]); }, {{3, 5}}},
      {"layer_norm", [](Graph& g, S v) { return g.layer_norm(v[0]); }, {{3, 5}}},
      {"softmax", [](Graph& g, S v) { return g.softmax(v[0]); }, {{3, 5}}},
      {"log_softmax", [](Graph& g, S v) { return g.log_softmax(v[0]); }, {{3, 5}}},
      {"sum", [](Graph& g, S v) { return g.sum(v[0]); }, {{3, 5}}},
      {"mean", [](Graph& g, S v) { return g.mean(v[0]); }, {{3, 5}}},
      {"concat", [](Graph& g, S v) { return g.concat({v[0], v[1]}); }, {{2, 3}, {2, 4}}},
      {"slice", [](Graph& g, S v) { return g.slice(v[0], 1, 4); }, {{2, 5}}},
      {"gather_rows", [](Graph& g, S v) { return g.gather_rows(v[0], {2, 0, 2}); }, {{4, 3}}},
      {"gather_cols", [](Graph& g, S v) { return g.gather_cols(v[0], {1, 0, 3}); }, {{3, 4}}},
      {"segment_max", [](Graph& g, S v) { return g.segment_max(v[0], 4); }, {{8, 3}}},
      {"sinusoidal", [](Graph& g, S v) { return g.sinusoidal(v[0], 8); }, {{3, 1}}},
  };
}

// Random smooth network in the shape of the ones used here: optional time
// embedding concatenated to the input, then linear -> [layer norm] -> gelu
// layers and a linear, softmax or log-softmax head. Every weight is an
// input, so the check covers parameter gradients too. Layers are at least 4
// wide: layer norm over 2 entries is a near-sign function whose curvature
// defeats central differences.
struct RandomNet {
  std::vector<Tensor> inputs;
  GraphBuilder build;
};

RandomNet random_net(Rng& rng) {
  RandomNet net;
  const std::size_t batch = 2 + rng.uniform_index(3);
  const std::size_t in = 2 + rng.uniform_index(4);
  const bool timed = rng.uniform() < 0.5;
  const bool norm = rng.uniform() < 0.5;
  const std::size_t depth = 1 + rng.uniform_index(3);
  const std::size_t head = rng.uniform_index(3);  // 0 linear, 1 softmax, 2 log-softmax
  net.inputs.push_back(random(rng, {batch, in}));
  if (timed) {
    Tensor t({batch, 1});
    for (auto& v : t.data()) v = rng.uniform();
    net.inputs.push_back(t);
  }
  std::size_t width = in + (timed ? 4 : 0);
  for (std::size_t l = 0; l <= depth; ++l) {
    const std::size_t out = 4 + rng.uniform_index(5);
    net.inputs.push_back(random(rng, {width, out}, 1.0 / std::sqrt(static_cast<double>(width))));
    net.inputs.push_back(random(rng, {1, out}, 0.1));
    width = out;
  }
  net.build = [timed, norm, depth, head](Graph& g, std::span<const Var> v) {
    std::size_t k = 0;
    Var h = v[k++];
    if (timed) h = g.concat({h, g.sinusoidal(g.scale(v[k++], 20.0), 4, 100.0)});
    for (std::size_t l = 0; l <= depth; ++l) {
      h = g.add(g.matmul(h, v[k]), v[k + 1]);
      k += 2;
      if (l < depth) h = g.gelu(norm ? g.layer_norm(h) : h);
    }
    if (head == 1) h = g.softmax(h);
    if (head == 2) h = g.log_softmax(h);
    return h;
  };
  return net;
}

std::optional<OpKind> parse_op(const std::string& name) {
  for (int k = 0; k <= static_cast<int>(OpKind::kStopGradient); ++k) {
    if (op_name(static_cast<OpKind>(k)) == name) return static_cast<OpKind>(k);
  }
  throw ValidationError("verify: unknown op '" + name + "'");
}

// Clears the injected fault even if a check throws.
struct FaultScope {
  explicit FaultScope(std::optional<OpKind> k) { testing::inject_backward_fault(k); }
  ~FaultScope() { testing::inject_backward_fault(std::nullopt); }
};

}  // namespace

VerifyReport gradient_suite(const VerifyOptions& o) {
  const std::optional<OpKind> fault = o.fault_op ? parse_op(*o.fault_op) : std::nullopt;
  FaultScope scope(fault);
  VerifyReport r;
  Rng rng(o.seed);
  for (const auto& c : op_cases()) {
    double rev = 0, jvp = 0, dual = 0;
    for (std::size_t t = 0; t < o.op_trials; ++t) {
      std::vector<Tensor> in;
      for (const auto& s : c.shapes) in.push_back(random(rng, s));
      const auto g = check_gradients(c.build, in, rng);
      rev = std::max(rev, g.reverse_rel_error);
      jvp = std::max(jvp, g.jvp_rel_error);
      dual = std::max(dual, g.duality_residual);
    }
    r.lines.push_back(below("gradient", std::string(c.name) + " reverse", rev, 1e-4));
    r.lines.push_back(below("gradient", std::string(c.name) + " jvp", jvp, 1e-4));
    r.lines.push_back(below("gradient", std::string(c.name) + " duality", dual, 1e-8));
  }
  double rev = 0, jvp = 0, dual = 0;
  std::size_t worst = 0;
  for (std::size_t i = 0; i < o.networks; ++i) {
    const RandomNet net = random_net(rng);
    const auto g = check_gradients(net.build, net.inputs, rng);
    if (g.reverse_rel_error > rev) worst = i;
    rev = std::max(rev, g.reverse_rel_error);
    jvp = std::max(jvp, g.jvp_rel_error);
    dual = std::max(dual, g.duality_residual);
  }
  const std::string tag = std::to_string(o.networks) + " networks";
  r.lines.push_back(below("gradient", tag + " reverse (worst #" + std::to_string(worst) + ")", rev, 1e-4));
  r.lines.push_back(below("gradient", tag + " jvp", jvp, 1e-4));
  r.lines.push_back(below("gradient", tag + " duality", dual, 1e-8));
  return r;
}

VerifyReport variance_suite(const VerifyOptions& o) {
  VerifyReport r;
  Rng rng(o.seed + 1);
  double worst_identity = 0, worst_perfect = 0, worst_flip = 0;
  bool strict = true;
  for (std::size_t i = 0; i < o.joints; ++i) {
    const auto j = analysis::random_joint(rng, 1 + rng.uniform_index(6), 4,
                                          1 + rng.uniform_index(5), 1 + rng.uniform_index(4));
    const auto d = analysis::decompose(j);
    const double residual = std::abs(d.total - (d.v_intra + d.v_inter));
    worst_identity = std::max(worst_identity, residual);
    r.lines.push_back(below("variance", "joint " + std::to_string(i) + " identity residual",
                            residual, 1e-10));
    const auto perfect = analysis::mse_bounds(j, [](std::size_t, std::size_t m) { return m; });
    worst_perfect = std::max({worst_perfect, std::abs(perfect.l_pfdag - d.v_intra),
                              std::abs(perfect.l_single - d.total)});
    if (d.v_inter > 1e-6 && !(perfect.l_pfdag < perfect.l_single)) strict = false;
    const auto flipped = analysis::mse_bounds_flipped(j, rng.uniform());
    worst_flip = std::max(worst_flip, std::abs(flipped.l_pfdag - d.v_intra - flipped.e_classify));
  }
  r.lines.push_back(below("variance", "max identity residual", worst_identity, 1e-10));
  r.lines.push_back(below("tradeoff", "perfect classifier gap", worst_perfect, 1e-10));
  r.lines.push_back({"tradeoff", "strictly below single-stage", strict ? 0.0 : 1.0, 0.5, strict});
  r.lines.push_back(below("tradeoff", "flipped labels add e_classify", worst_flip, 1e-10));
  return r;
}

VerifyReport meanflow_suite(const VerifyOptions& o) {
  VerifyReport r;
  Rng rng(o.seed + 2);
  double worst_zero = 0, worst_const = 0;
  for (std::size_t trial = 0; trial < 20; ++trial) {
    const std::size_t rows = 1 + rng.uniform_index(6), flat = 1 + rng.uniform_index(8);
    policy::FieldConfig fc;
    fc.flat = flat;
    fc.obs_dim = 3;
    fc.obs_proj = 4;
    fc.hidden = 16;
    fc.depth = 2;
    nets::ParamStore store;
    const policy::VelocityField field(fc, "f", store, rng);
    const Tensor obs = rng.normal_tensor({rows, 3});
    const policy::FieldFn fn = [&](Graph& g, Var z, Var tau, Var rr) {
      nets::BoundParams p(g, store, false);
      return field.forward(p, z, tau, rr, g.input(obs), {});
    };
    Tensor rt({rows, 1});
    for (auto& v : rt.data()) v = rng.uniform();
    const auto s0 = policy::make_flow_sample(rng.normal_tensor({rows, flat}),
                                             rng.normal_tensor({rows, flat}), rt, rt);
    const Tensor t0 = policy::meanflow_target(s0, fn);
    for (std::size_t i = 0; i < t0.size(); ++i) worst_zero = std::max(worst_zero, std::abs(t0[i] - s0.v[i]));

    const Tensor c = rng.normal_tensor({rows, flat});
    const policy::FieldFn constant = [&](Graph& g, Var z, Var, Var) {
      return g.add(g.input(c), g.scale(z, 0.0));
    };
    const auto s1 = policy::make_flow_sample(rng.normal_tensor({rows, flat}),
                                             rng.normal_tensor({rows, flat}),
                                             Tensor::full({rows, 1}, 0.0), Tensor::full({rows, 1}, 1.0));
    const Tensor t1 = policy::meanflow_target(s1, constant);
    for (std::size_t i = 0; i < t1.size(); ++i) worst_const = std::max(worst_const, std::abs(t1[i] - s1.v[i]));
  }
  // Exact equality: the bound 1e-300 only admits zero.
  r.lines.push_back({"meanflow", "zero interval target == v", worst_zero, 0.0, worst_zero == 0.0});
  r.lines.push_back({"meanflow", "constant field target == v", worst_const, 0.0, worst_const == 0.0});
  return r;
}

VerifyReport run_verify(const VerifyOptions& o) {
  VerifyReport r;
  append(r, gradient_suite(o));
  append(r, variance_suite(o));
  append(r, meanflow_suite(o));
  return r;
}

}  // namespace modeflow::cli
