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


#include "lidarloc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lidarloc/error.hpp"

namespace lidarloc {
namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

}  // namespace

double ComponentError::translation_norm() const {
  return std::sqrt(lateral * lateral + longitudinal * longitudinal + vertical * vertical);
}

const char* component_name(Component component) {
  switch (component) {
    case Component::kLateral: return "lateral";
    case Component::kLongitudinal: return "longitudinal";
    case Component::kVertical: return "vertical";
    case Component::kRoll: return "roll";
    case Component::kPitch: return "pitch";
    case Component::kHeading: return "heading";
  }
  return "unknown";
}

Component parse_component(std::string_view name) {
  for (Component c : kAllComponents) {
    if (name == component_name(c)) return c;
  }
  throw InvalidArgumentError("unknown error component '" + std::string(name) + "'");
}

double component_value(const ComponentError& error, Component component) {
  switch (component) {
    case Component::kLateral: return error.lateral;
    case Component::kLongitudinal: return error.longitudinal;
    case Component::kVertical: return error.vertical;
    case Component::kRoll: return error.roll;
    case Component::kPitch: return error.pitch;
    case Component::kHeading: return error.heading;
  }
  return 0.0;
}

ComponentError pose_error(const Pose& estimate, const Pose& truth) {
  const Pose E = truth.inverse() * estimate;
  const Eigen::Matrix3d& R = E.rotation();
  ComponentError e;
  e.longitudinal = E.translation().x();
  e.lateral = E.translation().y();
  e.vertical = E.translation().z();
  // R = Rx(roll) Ry(pitch) Rz(heading).
  e.roll = std::atan2(-R(1, 2), R(2, 2)) * kRadToDeg;
  e.pitch = std::asin(std::clamp(R(0, 2), -1.0, 1.0)) * kRadToDeg;
  e.heading = std::atan2(-R(0, 1), R(0, 0)) * kRadToDeg;
  return e;
}

ComponentError rmse(std::span<const ComponentError> samples) {
  if (samples.empty()) throw InsufficientDataError("rmse needs at least one sample");
  std::array<double, 6> sum{};
  for (const ComponentError& s : samples) {
    for (std::size_t c = 0; c < kAllComponents.size(); ++c) {
      const double v = component_value(s, kAllComponents[c]);
      sum[c] += v * v;
    }
  }
  const double n = static_cast<double>(samples.size());
  auto root = [&](std::size_t c) { return std::sqrt(sum[c] / n); };
  return {root(0), root(1), root(2), root(3), root(4), root(5)};
}

double realtime_ratio(double runtime_ms, double frame_period_s) {
  if (!(runtime_ms > 0.0) || !(frame_period_s > 0.0)) {
    throw InvalidArgumentError("runtime and frame period must be positive");
  }
  return runtime_ms / (1000.0 * frame_period_s);
}

std::size_t knee_point(std::span<const CurvePoint> points) {
  if (points.empty()) throw InsufficientDataError("knee_point needs at least one point");
  double max_runtime = 0.0;
  double max_error = 0.0;
  for (const CurvePoint& p : points) {
    if (!std::isfinite(p.runtime_ms) || !std::isfinite(p.error) || p.runtime_ms < 0.0 ||
        p.error < 0.0) {
      throw InvalidArgumentError("knee_point coordinates must be finite and non-negative");
    }
    max_runtime = std::max(max_runtime, p.runtime_ms);
    max_error = std::max(max_error, p.error);
  }
  auto scaled = [](double v, double max) { return max > 0.0 ? v / max : 0.0; };
  std::size_t best = 0;
  double best_area = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double area =
        scaled(points[i].runtime_ms, max_runtime) * scaled(points[i].error, max_error);
    const bool better = i == 0 || area < best_area ||
                        (area == best_area && points[i].runtime_ms < points[best].runtime_ms);
    if (better) {
      best = i;
      best_area = area;
    }
  }
  return best;
}

std::vector<ParetoPoint> assemble_pareto(std::span<const SweepResult> results,
                                         Component component) {
  if (results.empty()) throw InsufficientDataError("assemble_pareto needs at least one result");
  std::vector<ParetoPoint> curve;
  curve.reserve(results.size());
  for (const SweepResult& r : results) {
    curve.push_back({r.interval, r.runtime_ms, component_value(r.rmse, component)});
  }
  std::sort(curve.begin(), curve.end(), [](const ParetoPoint& a, const ParetoPoint& b) {
    if (a.runtime_ms != b.runtime_ms) return a.runtime_ms > b.runtime_ms;
    if (a.interval != b.interval) return a.interval < b.interval;
    return a.error < b.error;
  });
  return curve;
}

}  // namespace lidarloc
