// Copyright 2026 The lidarloc Authors
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

#include <algorithm>
#include <cstddef>
#include <limits>
#include <vector>

namespace lidarloc::detail {

struct RobustGate {
  double threshold = std::numeric_limits<double>::infinity();
  std::size_t beyond = 0;
};

// Gate on absolute point-to-plane distances at `sigmas` robust standard
// deviations (1.4826 x median), never below `floor`. Disabled when sigmas <= 0.
inline RobustGate robust_gate(std::vector<double> residuals, double sigmas, double floor) {
  RobustGate gate;
  if (residuals.empty() || !(sigmas > 0.0)) return gate;
  auto mid = residuals.begin() + static_cast<std::ptrdiff_t>(residuals.size() / 2);
  std::nth_element(residuals.begin(), mid, residuals.end());
  gate.threshold = std::max(sigmas * 1.4826 * *mid, floor);
  gate.beyond = static_cast<std::size_t>(std::count_if(
      residuals.begin(), residuals.end(), [&](double r) { return r > gate.threshold; }));
  return gate;
}

}  // namespace lidarloc::detail
