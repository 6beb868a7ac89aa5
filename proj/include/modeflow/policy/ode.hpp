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

#include <cstddef>
#include <functional>
#include <string>

#include "modeflow/tensorcore/tensor.hpp"

namespace modeflow::policy {

struct Solver {
  enum class Kind { kEuler, kDopri5 };
  Kind kind = Kind::kEuler;
  std::size_t nfe = 1;  // Euler steps
  double rtol = 1e-5, atol = 1e-7;
  std::size_t max_steps = 10000;

  static Solver euler(std::size_t nfe) { return {Kind::kEuler, nfe}; }
  static Solver dopri5() { return {Kind::kDopri5}; }
  std::string name() const;
};

// Solver from "euler1", "euler10", ..., or "dopri5".
Solver parse_solver(const std::string& text);

// dz/dr = f(z, r).
using OdeFn = std::function<Tensor(const Tensor& z, double r)>;

struct OdeResult {
  Tensor z;
  std::size_t nfe = 0;
  std::size_t steps = 0;
  std::size_t rejected = 0;
};

// Integrates from r0 to r1 (either direction). dopri5 throws Error once
// max_steps accepted + rejected steps are exceeded.
OdeResult integrate(const OdeFn& f, const Tensor& z, double r0, double r1, const Solver& solver);

}  // namespace modeflow::policy
