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
#include <vector>

namespace lidarloc::detail {

inline constexpr std::size_t kReduceBlock = 256;

// Sums per-block partials with a fixed pairwise tree so the result does not
// depend on the number of threads.
template <typename Acc, typename Fn>
Acc blocked_tree_sum(std::size_t n, const Acc& zero, Fn&& accumulate_range,
                     std::size_t block = kReduceBlock) {
  const std::size_t blocks = (n + block - 1) / block;
  if (blocks == 0) return zero;
  std::vector<Acc> partial(blocks, zero);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(blocks); ++b) {
    const std::size_t begin = static_cast<std::size_t>(b) * block;
    accumulate_range(begin, std::min(n, begin + block), partial[static_cast<std::size_t>(b)]);
  }
  for (std::size_t stride = 1; stride < blocks; stride *= 2) {
    for (std::size_t i = 0; i + stride < blocks; i += 2 * stride) partial[i] += partial[i + stride];
  }
  return partial[0];
}

}  // namespace lidarloc::detail
