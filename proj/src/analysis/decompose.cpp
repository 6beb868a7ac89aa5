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

#include "modeflow/analysis/decompose.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <utility>

#include "modeflow/tensorcore/error.hpp"

namespace modeflow::analysis {

void validate(const DiscreteJoint& joint) {
  if (joint.atoms.empty()) throw ValidationError("joint: empty support");
  if (joint.atoms.size() > 10000) throw ValidationError("joint: more than 10^4 atoms");
  const std::size_t dim = joint.atoms.front().a.size();
  if (dim == 0) throw ValidationError("joint: empty action vectors");
  double sum = 0.0;
  for (const auto& at : joint.atoms) {
    if (at.a.size() != dim) throw ValidationError("joint: action dimensions differ");
    if (!(at.p >= 0.0) || !std::isfinite(at.p)) throw ValidationError("joint: bad probability");
    for (double x : at.a) {
      if (!std::isfinite(x)) throw ValidationError("joint: non-finite action");
    }
    sum += at.p;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw ValidationError("joint: probabilities do not sum to 1");
}

DiscreteJoint random_joint(Rng& rng, std::size_t obs, std::size_t modes, std::size_t actions,
                           std::size_t dim) {
  if (obs == 0 || modes == 0 || actions == 0 || dim == 0) {
    throw ValidationError("random_joint: all sizes must be positive");
  }
  DiscreteJoint j;
  double sum = 0.0;
  for (std::size_t o = 0; o < obs; ++o) {
    const std::size_t mo = 1 + rng.uniform_index(modes);
    for (std::size_t m = 0; m < mo; ++m) {
      std::vector<double> centre(dim);
      for (auto& c : centre) c = 3.0 * rng.normal();
      for (std::size_t k = 0; k < actions; ++k) {
        Atom at{o, m, centre, rng.uniform(0.05, 1.0)};
        for (auto& x : at.a) x += rng.normal();
        sum += at.p;
        j.atoms.push_back(std::move(at));
      }
    }
  }
  for (auto& at : j.atoms) at.p /= sum;
  // Renormalization leaves a last-bit residue; fold it into the first atom.
  double s = 0.0;
  for (const auto& at : j.atoms) s += at.p;
  j.atoms.front().p += 1.0 - s;
  return j;
}

namespace {

using Key = std::pair<std::size_t, std::size_t>;

struct Moments {
  double p = 0.0;
  std::vector<double> sum;  // probability-weighted sum of a
  std::vector<double> mean() const {
    std::vector<double> out(sum.size());
    for (std::size_t i = 0; i < sum.size(); ++i) out[i] = sum[i] / p;
    return out;
  }
};

void add(Moments& mo, const std::vector<double>& a, double p) {
  if (mo.sum.empty()) mo.sum.assign(a.size(), 0.0);
  mo.p += p;
  for (std::size_t i = 0; i < a.size(); ++i) {
    mo.sum[i] += p * a[i];
  }
}

double sqdist(const std::vector<double>& x, const std::vector<double>& y) {
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) d += (x[i] - y[i]) * (x[i] - y[i]);
  return d;
}

struct Tables {
  std::map<std::size_t, Moments> by_o;
  std::map<Key, Moments> by_om;
  std::map<std::size_t, std::vector<double>> mu_o;
  std::map<Key, std::vector<double>> mu_om;
};

Tables tabulate_unchecked(const DiscreteJoint& joint) {
  Tables t;
  for (const auto& at : joint.atoms) {
    add(t.by_o[at.o], at.a, at.p);
    add(t.by_om[{at.o, at.m}], at.a, at.p);
  }
  for (const auto& [k, mo] : t.by_om) {
    if (!(mo.p > 0.0)) throw ValidationError("joint: zero-probability (o, m) slice");
    t.mu_om[k] = mo.mean();
  }
  for (const auto& [o, mo] : t.by_o) t.mu_o[o] = mo.mean();
  return t;
}

Tables tabulate(const DiscreteJoint& joint) {
  validate(joint);
  return tabulate_unchecked(joint);
}

// Centered second moments by a second pass, which avoids the cancellation
// of E|a|^2 - |E a|^2.
Decomposition decompose_tables(const DiscreteJoint& joint, const Tables& t) {
  Decomposition d;
  for (const auto& at : joint.atoms) {
    d.total += at.p * sqdist(at.a, t.mu_o.at(at.o));
    d.v_intra += at.p * sqdist(at.a, t.mu_om.at({at.o, at.m}));
  }
  for (const auto& [k, mo] : t.by_om) d.v_inter += mo.p * sqdist(t.mu_om.at(k), t.mu_o.at(k.first));
  return d;
}

std::vector<std::size_t> modes_at(const Tables& t, std::size_t o) {
  std::vector<std::size_t> out;
  for (auto it = t.by_om.lower_bound({o, 0}); it != t.by_om.end() && it->first.first == o; ++it) {
    out.push_back(it->first.second);
  }
  return out;
}

// Bounds for a classifier given as a distribution over chosen modes.
MseBounds bounds_for(const DiscreteJoint& joint, const Tables& t,
                     const std::function<std::vector<std::pair<std::size_t, double>>(
                         std::size_t o, std::size_t m)>& choose) {
  MseBounds b;
  b.parts = decompose_tables(joint, t);
  auto mean_of = [&](std::size_t o, std::size_t m) -> const std::vector<double>& {
    const auto it = t.mu_om.find({o, m});
    if (it == t.mu_om.end()) {
      throw ValidationError("classifier picked mode " + std::to_string(m) +
                            " which is absent at observation " + std::to_string(o));
    }
    return it->second;
  };
  for (const auto& at : joint.atoms) {
    b.l_single += at.p * sqdist(at.a, t.mu_o.at(at.o));
    for (const auto& [mh, q] : choose(at.o, at.m)) b.l_pfdag += at.p * q * sqdist(at.a, mean_of(at.o, mh));
  }
  for (const auto& [k, mo] : t.by_om) {
    for (const auto& [mh, q] : choose(k.first, k.second)) {
      b.e_classify += mo.p * q * sqdist(t.mu_om.at(k), mean_of(k.first, mh));
    }
  }
  b.parts.e_classify = b.e_classify;
  return b;
}

}  // namespace

Decomposition decompose(const DiscreteJoint& joint) {
  const Tables t = tabulate(joint);
  return decompose_tables(joint, t);
}

MseBounds mse_bounds(const DiscreteJoint& joint, const Classifier& classifier) {
  const Tables t = tabulate(joint);
  return bounds_for(joint, t, [&](std::size_t o, std::size_t m) {
    return std::vector<std::pair<std::size_t, double>>{{classifier(o, m), 1.0}};
  });
}

MseBounds mse_bounds_flipped(const DiscreteJoint& joint, double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ValidationError("flip rate must lie in [0, 1]");
  const Tables t = tabulate(joint);
  return bounds_for(joint, t, [&](std::size_t o, std::size_t m) {
    const auto present = modes_at(t, o);
    std::vector<std::pair<std::size_t, double>> out;
    if (present.size() == 1) return std::vector<std::pair<std::size_t, double>>{{m, 1.0}};
    const double other = rho / static_cast<double>(present.size() - 1);
    for (auto k : present) out.push_back({k, k == m ? 1.0 - rho : other});
    return out;
  });
}

double predictor_mse(const DiscreteJoint& joint,
                     const std::function<std::vector<double>(std::size_t o)>& predictor) {
  validate(joint);
  double l = 0.0;
  std::map<std::size_t, std::vector<double>> cache;
  for (const auto& at : joint.atoms) {
    auto it = cache.find(at.o);
    if (it == cache.end()) {
      it = cache.emplace(at.o, predictor(at.o)).first;
      if (it->second.size() != at.a.size()) throw ShapeError("predictor output width differs");
    }
    l += at.p * sqdist(at.a, it->second);
  }
  return l;
}

Decomposition empirical_decompose(const std::vector<Sample>& samples) {
  if (samples.empty()) throw ValidationError("empirical decomposition: no samples");
  std::map<Key, std::size_t> counts;
  for (const auto& s : samples) {
    if (s.a.empty() || s.a.size() != samples.front().a.size()) {
      throw ValidationError("empirical decomposition: action dimensions differ");
    }
    ++counts[{s.key, s.mode}];
  }
  for (const auto& [k, n] : counts) {
    if (n < 2) {
      throw ValidationError("empirical decomposition: bin (" + std::to_string(k.first) + ", " +
                            std::to_string(k.second) + ") has fewer than 2 samples");
    }
  }
  // Each sample is an atom of the empirical joint.
  DiscreteJoint j;
  const double w = 1.0 / static_cast<double>(samples.size());
  for (const auto& s : samples) j.atoms.push_back({s.key, s.mode, s.a, w});
  // Equal weights need no renormalization and the 10^4 cap guards only the
  // exact oracle, so the validation pass is skipped.
  return decompose_tables(j, tabulate_unchecked(j));
}

std::vector<Sample> step_samples(const synthenv::Dataset& ds, std::size_t t) {
  std::vector<Sample> out;
  for (const auto& d : ds.demos) {
    if (t >= d.length()) continue;
    const auto row = d.actions.row_span(t);
    out.push_back({0, d.mode, std::vector<double>(row.begin(), row.end())});
  }
  return out;
}

std::string decomposition_csv_header() { return "label,total,v_intra,v_inter,e_classify,residual\n"; }

std::string decomposition_csv_row(const std::string& label, const Decomposition& d) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%.17g,%.3g\n", label.c_str(), d.total,
                d.v_intra, d.v_inter, d.e_classify, d.total - (d.v_intra + d.v_inter));
  return buf;
}

std::string decomposition_summary(const Decomposition& d) {
  char buf[384];
  std::snprintf(buf, sizeof buf,
                "total variance    %.10g\n"
                "within-mode       %.10g\n"
                "between-mode      %.10g\n"
                "classify error    %.10g\n"
                "identity residual %.3g\n",
                d.total, d.v_intra, d.v_inter, d.e_classify, d.total - (d.v_intra + d.v_inter));
  return buf;
}

}  // namespace modeflow::analysis
