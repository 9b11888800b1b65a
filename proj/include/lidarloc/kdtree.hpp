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

#include <Eigen/Core>
#include <cstddef>
#include <optional>
#include <vector>

namespace lidarloc {

/// Exact 3-D kd-tree. Distance ties are resolved toward the lower point
/// index so results match a linear scan exactly.
class KdTree {
 public:
  struct Neighbor {
    std::size_t index;
    double squared_distance;
  };

  KdTree() = default;
  explicit KdTree(std::vector<Eigen::Vector3d> points);

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const Eigen::Vector3d& point(std::size_t i) const { return points_[i]; }

  /// Nearest point within max_distance (inclusive), if any.
  std::optional<Neighbor> Nearest(const Eigen::Vector3d& query, double max_distance) const;
  /// The k nearest points ordered by (distance, index); fewer if size() < k.
  std::vector<Neighbor> KNearest(const Eigen::Vector3d& query, std::size_t k) const;

 private:
  struct Node {
    // Leaves: [begin, end) into order_. Inner nodes split on `axis` at `split`.
    std::size_t begin = 0;
    std::size_t end = 0;
    int axis = -1;
    double split = 0.0;
    int left = -1;
    int right = -1;
  };

  int Build(std::size_t begin, std::size_t end);

  std::vector<Eigen::Vector3d> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace lidarloc
