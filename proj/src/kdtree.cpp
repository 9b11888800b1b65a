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

#include "lidarloc/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <queue>

namespace lidarloc {

namespace {

constexpr std::size_t kLeafSize = 8;

bool Closer(const KdTree::Neighbor& a, const KdTree::Neighbor& b) {
  if (a.squared_distance != b.squared_distance) return a.squared_distance < b.squared_distance;
  return a.index < b.index;
}

}  // namespace

KdTree::KdTree(std::vector<Eigen::Vector3d> points) : points_(std::move(points)) {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    Build(0, points_.size());
  }
}

int KdTree::Build(std::size_t begin, std::size_t end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{begin, end});
  if (end - begin <= kLeafSize) return id;

  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d hi = -lo;
  for (std::size_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi(axis) - lo(axis) <= 0.0) return id;  // all coincident: keep as a leaf

  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::size_t a, std::size_t b) {
                     const double pa = points_[a](axis), pb = points_[b](axis);
                     return pa != pb ? pa < pb : a < b;
                   });
  const double split = points_[order_[mid]](axis);
  const int left = Build(begin, mid);
  const int right = Build(mid, end);
  Node& node = nodes_[id];
  node.axis = axis;
  node.split = split;
  node.left = left;
  node.right = right;
  return id;
}

std::optional<KdTree::Neighbor> KdTree::Nearest(const Eigen::Vector3d& query,
                                                 double max_distance) const {
  if (points_.empty()) return std::nullopt;
  Neighbor best{std::numeric_limits<std::size_t>::max(), max_distance * max_distance};
  bool found = false;

  std::vector<std::pair<int, double>> stack;  // node, lower bound on squared distance
  stack.emplace_back(0, 0.0);
  while (!stack.empty()) {
    const auto [id, bound] = stack.back();
    stack.pop_back();
    if (bound > best.squared_distance) continue;
    const Node& node = nodes_[id];
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t idx = order_[i];
        const Neighbor candidate{idx, (points_[idx] - query).squaredNorm()};
        if (candidate.squared_distance > best.squared_distance) continue;
        if (!found || Closer(candidate, best)) {
          best = candidate;
          found = true;
        }
      }
      continue;
    }
    const double diff = query(node.axis) - node.split;
    const int near = diff < 0.0 ? node.left : node.right;
    const int far = diff < 0.0 ? node.right : node.left;
    // Points equal to the split value can sit on either side, hence the
    // non-strict bound.
    stack.emplace_back(far, std::max(bound, diff * diff));
    stack.emplace_back(near, bound);
  }
  if (!found) return std::nullopt;
  return best;
}

std::vector<KdTree::Neighbor> KdTree::KNearest(const Eigen::Vector3d& query,
                                               std::size_t k) const {
  std::vector<Neighbor> heap;  // max-heap under Closer
  if (points_.empty() || k == 0) return heap;
  heap.reserve(k + 1);
  auto worst_bound = [&]() {
    return heap.size() < k ? std::numeric_limits<double>::infinity()
                           : heap.front().squared_distance;
  };

  std::vector<std::pair<int, double>> stack;
  stack.emplace_back(0, 0.0);
  while (!stack.empty()) {
    const auto [id, bound] = stack.back();
    stack.pop_back();
    if (bound > worst_bound()) continue;
    const Node& node = nodes_[id];
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t idx = order_[i];
        const Neighbor candidate{idx, (points_[idx] - query).squaredNorm()};
        if (heap.size() < k) {
          heap.push_back(candidate);
          std::push_heap(heap.begin(), heap.end(), Closer);
        } else if (Closer(candidate, heap.front())) {
          std::pop_heap(heap.begin(), heap.end(), Closer);
          heap.back() = candidate;
          std::push_heap(heap.begin(), heap.end(), Closer);
        }
      }
      continue;
    }
    const double diff = query(node.axis) - node.split;
    const int near = diff < 0.0 ? node.left : node.right;
    const int far = diff < 0.0 ? node.right : node.left;
    stack.emplace_back(far, std::max(bound, diff * diff));
    stack.emplace_back(near, bound);
  }
  std::sort_heap(heap.begin(), heap.end(), Closer);
  return heap;
}

}  // namespace lidarloc
