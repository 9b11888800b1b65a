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

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lidarloc/geom.hpp"

namespace lidarloc {

/// Per-axis error. Translation in metres in the truth vehicle frame, rotation
/// as x-y-z intrinsic roll, pitch, heading in degrees. Single samples are
/// signed; RMSE aggregates are non-negative.
struct ComponentError {
  double lateral = 0.0;
  double longitudinal = 0.0;
  double vertical = 0.0;
  double roll = 0.0;
  double pitch = 0.0;
  double heading = 0.0;

  double translation_norm() const;
};

enum class Component { kLateral, kLongitudinal, kVertical, kRoll, kPitch, kHeading };
inline constexpr std::array<Component, 6> kAllComponents = {
    Component::kLateral, Component::kLongitudinal, Component::kVertical,
    Component::kRoll,    Component::kPitch,        Component::kHeading};

const char* component_name(Component component);
/// Accepts the names returned by component_name; throws InvalidArgumentError.
Component parse_component(std::string_view name);
double component_value(const ComponentError& error, Component component);

/// E = truth^-1 * estimate split into components.
ComponentError pose_error(const Pose& estimate, const Pose& truth);

/// Throws InsufficientDataError when `samples` is empty.
ComponentError rmse(std::span<const ComponentError> samples);

struct SweepResult {
  std::string route;
  std::string backend;
  std::size_t interval = 1;
  ComponentError rmse;
  double runtime_ms = 0.0;  // mean per frame
  double rt_ratio = 0.0;    // runtime / frame period
};

/// Real-time ratio of a mean per-frame runtime. Throws InvalidArgumentError
/// unless both are positive.
double realtime_ratio(double runtime_ms, double frame_period_s);

struct CurvePoint {
  double runtime_ms = 0.0;
  double error = 0.0;
};

/// Index of the point with the smallest runtime x error rectangle after each
/// axis is divided by its largest value. Ties go to the smaller runtime.
/// Throws InsufficientDataError when `points` is empty and
/// InvalidArgumentError on negative or non-finite coordinates.
std::size_t knee_point(std::span<const CurvePoint> points);

struct ParetoPoint {
  std::size_t interval = 1;
  double runtime_ms = 0.0;
  double error = 0.0;
};

/// (runtime, RMSE) pairs for one component, runtime descending with
/// interval ascending among equal runtimes. Throws InsufficientDataError when
/// `results` is empty.
std::vector<ParetoPoint> assemble_pareto(std::span<const SweepResult> results,
                                         Component component);

}  // namespace lidarloc
