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

#include "modeflow/policy/ode.hpp"

#include <algorithm>
#include <cmath>

#include "modeflow/tensorcore/error.hpp"

namespace modeflow::policy {

std::string Solver::name() const {
  return kind == Kind::kEuler ? "euler" + std::to_string(nfe) : "dopri5";
}

Solver parse_solver(const std::string& text) {
  if (text == "dopri5") return Solver::dopri5();
  if (text.rfind("euler", 0) == 0 && text.size() > 5) {
    const std::string digits = text.substr(5);
    if (std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      const auto n = std::stoul(digits);
      if (n > 0) return Solver::euler(n);
    }
  }
  throw ValidationError("unknown solver '" + text + "' (expected eulerN or dopri5)");
}

namespace {

// z + h * sum_i c_i k_i
Tensor combine(const Tensor& z, double h, std::initializer_list<std::pair<double, const Tensor*>> terms) {
  Tensor out = z;
  for (const auto& [c, k] : terms) {
    if (c == 0.0) continue;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += h * c * (*k)[i];
  }
  return out;
}

OdeResult euler(const OdeFn& f, const Tensor& z, double r0, double r1, std::size_t n) {
  OdeResult res{z, 0, 0, 0};
  const double h = (r1 - r0) / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = r0 + h * static_cast<double>(i);
    const Tensor k = f(res.z, r);
    ++res.nfe;
    for (std::size_t j = 0; j < k.size(); ++j) res.z[j] += h * k[j];
    ++res.steps;
  }
  return res;
}

// Dormand-Prince 5(4) with FSAL and the usual step-size controller.
OdeResult dopri5(const OdeFn& f, const Tensor& z0, double r0, double r1, const Solver& s) {
  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                   a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                   a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                   b6 = 11.0 / 84;
  // b - b_hat (fourth-order weights)
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                   e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  OdeResult res{z0, 0, 0, 0};
  const double span = r1 - r0;
  if (span == 0.0) return res;
  const double dir = span > 0 ? 1.0 : -1.0;
  double r = r0;
  Tensor k1 = f(res.z, r);
  ++res.nfe;
  double h = dir * std::min(std::abs(span), 0.1);
  const double eps = 1e-12 * std::max(1.0, std::abs(r1));
  while (dir * (r1 - r) > eps) {
    if (res.steps + res.rejected >= s.max_steps) {
      throw Error("dopri5: step limit " + std::to_string(s.max_steps) + " exceeded");
    }
    if (dir * (r + h - r1) > 0) h = r1 - r;
    const Tensor& y = res.z;
    const Tensor k2 = f(combine(y, h, {{a21, &k1}}), r + c2 * h);
    const Tensor k3 = f(combine(y, h, {{a31, &k1}, {a32, &k2}}), r + c3 * h);
    const Tensor k4 = f(combine(y, h, {{a41, &k1}, {a42, &k2}, {a43, &k3}}), r + c4 * h);
    const Tensor k5 =
        f(combine(y, h, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}), r + c5 * h);
    const Tensor k6 = f(combine(y, h, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}),
                        r + h);
    Tensor next = combine(y, h, {{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}});
    const Tensor k7 = f(next, r + h);
    res.nfe += 6;

    double err = 0.0;
    for (std::size_t i = 0; i < next.size(); ++i) {
      const double d =
          h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
      const double sc = s.atol + s.rtol * std::max(std::abs(y[i]), std::abs(next[i]));
      err += (d / sc) * (d / sc);
    }
    err = std::sqrt(err / static_cast<double>(std::max<std::size_t>(next.size(), 1)));
    if (!std::isfinite(err)) throw NonFiniteError("dopri5: non-finite error estimate");

    if (err <= 1.0) {
      r += h;
      res.z = std::move(next);
      k1 = k7;
      ++res.steps;
    } else {
      ++res.rejected;
    }
    const double factor =
        err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
    h *= err <= 1.0 ? factor : std::min(1.0, factor);
  }
  return res;
}

}  // namespace

OdeResult integrate(const OdeFn& f, const Tensor& z, double r0, double r1, const Solver& solver) {
  if (solver.kind == Solver::Kind::kEuler) {
    if (solver.nfe == 0) throw ValidationError("euler needs at least one step");
    return euler(f, z, r0, r1, solver.nfe);
  }
  if (!(solver.rtol > 0) || !(solver.atol > 0) || solver.max_steps == 0) {
    throw ValidationError("dopri5: tolerances and step cap must be positive");
  }
  return dopri5(f, z, r0, r1, solver);
}

}  // namespace modeflow::policy
