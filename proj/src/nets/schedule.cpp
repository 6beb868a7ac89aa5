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

#include "modeflow/nets/schedule.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "modeflow/tensorcore/error.hpp"

namespace modeflow::nets {

void validate(const ScheduleConfig& config) {
  if (config.warmup >= config.total) {
    throw ValidationError("schedule needs warmup < total (warmup=" +
                          std::to_string(config.warmup) +
                          ", total=" + std::to_string(config.total) + ")");
  }
  if (!(config.peak > 0) || !std::isfinite(config.peak)) {
    throw ValidationError("schedule peak rate must be positive");
  }
}

double lr_at(std::uint64_t step, const ScheduleConfig& config) {
  validate(config);
  if (step > config.total) {
    throw ValidationError("step " + std::to_string(step) + " beyond schedule total " +
                          std::to_string(config.total));
  }
  if (step <= config.warmup) {
    if (config.warmup == 0) return config.peak;
    return config.peak * static_cast<double>(step) / static_cast<double>(config.warmup);
  }
  const double frac = static_cast<double>(step - config.warmup) /
                      static_cast<double>(config.total - config.warmup);
  return 0.5 * config.peak * (1.0 + std::cos(std::numbers::pi * frac));
}

}  // namespace modeflow::nets
