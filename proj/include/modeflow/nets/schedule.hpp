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

#include <cstdint>

namespace modeflow::nets {

struct ScheduleConfig {
  std::uint64_t warmup = 0;
  std::uint64_t total = 1;
  double peak = 1e-4;
};

void validate(const ScheduleConfig& config);

// Linear 0 -> peak over [0, warmup], cosine peak -> 0 over [warmup, total].
double lr_at(std::uint64_t step, const ScheduleConfig& config);

}  // namespace modeflow::nets
