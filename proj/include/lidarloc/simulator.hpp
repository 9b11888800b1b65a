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
#include <cstdint>
#include <vector>

#include "lidarloc/cloud.hpp"
#include "lidarloc/geom.hpp"

namespace lidarloc {

/// Infinite plane {x : normal . x = offset}.
struct PlanePrimitive {
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  double offset = 0.0;
};

struct BoxPrimitive {
  Eigen::Vector3d min_corner = Eigen::Vector3d::Zero();
  Eigen::Vector3d max_corner = Eigen::Vector3d::Ones();
};

/// Axis-aligned box translating at a constant world-frame velocity; the box
/// occupies [min + v t, max + v t] at time t.
struct DynamicBox {
  BoxPrimitive box;
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
};

struct WorldSpec {
  std::vector<PlanePrimitive> planes;
  std::vector<BoxPrimitive> boxes;
  std::vector<DynamicBox> dynamic_boxes;
  std::uint64_t seed = 1;

  /// Throws ConfigError when there are no static primitives or a box has a
  /// non-positive extent.
  void Validate() const;
};

struct SensorSpec {
  double horizontal_fov_deg = 120.0;
  double vertical_fov_deg = 30.0;
  double scan_rate_hz = 10.0;
  int rows = 64;
  int columns = 900;
  double max_range = 500.0;
  double min_range = 0.5;
  double doppler_noise = 0.0;  // sigma [m/s]
  double range_noise = 0.0;    // sigma [m]
  double bias_slope = 0.0;     // (m/s)/m
  double bias_intercept = 0.0; // m/s
  double gyro_rate_hz = 200.0;
  double gyro_noise = 0.0;     // sigma [rad/s]
  Eigen::Vector3d gyro_bias = Eigen::Vector3d::Zero();
  /// Sensor-to-vehicle transform (maps sensor-frame points into the vehicle frame).
  Pose T_vehicle_sensor;

  double frame_period() const { return 1.0 / scan_rate_hz; }
  void Validate() const;
};

/// Constant body twist held over [t_begin, t_end).
struct TwistSegment {
  double t_begin = 0.0;
  double t_end = 0.0;
  Twist twist = Twist::Zero();
};

/// Piecewise-constant-twist trajectory with exact screw integration.
/// pose(t) maps vehicle-frame points into the world frame.
class GroundTruth {
 public:
  GroundTruth() = default;
  GroundTruth(const Pose& start, std::vector<TwistSegment> segments);

  double t_begin() const { return segments_.front().t_begin; }
  double t_end() const { return segments_.back().t_end; }
  Pose pose(double t) const;
  Twist twist(double t) const;
  const std::vector<TwistSegment>& segments() const { return segments_; }

 private:
  std::size_t SegmentIndex(double t) const;

  std::vector<TwistSegment> segments_;
  std::vector<Pose> segment_start_poses_;
};

/// Contiguous segments starting at t = 0 from (duration, twist) pairs.
std::vector<TwistSegment> segments_from_durations(
    const std::vector<std::pair<double, Twist>>& pieces);

/// Throws ConfigError when segments overlap, leave gaps, or are empty.
GroundTruth build_trajectory(const Pose& start, std::vector<TwistSegment> segments);

/// One scan swept uniformly in azimuth over [t_start, t_end]; every column
/// is cast from the sensor pose at its own timestamp. Doppler follows the
/// estimator's sign: q_hat . (v_sensor - v_surface), positive for a static
/// target ahead of a forward-moving sensor, plus the configured range bias
/// and noise. `frame_seed` selects the noise stream.
LidarFrame render_scan(const WorldSpec& world, const GroundTruth& gt, double t_start,
                       double t_end, const SensorSpec& sensor, std::uint64_t frame_seed = 0);

/// Samples C_sv w(t) + bias + noise at the global sample grid k / rate that
/// falls in [t_start, t_end).
std::vector<GyroSample> simulate_gyro(const GroundTruth& gt, const SensorSpec& sensor,
                                      double t_start, double t_end,
                                      std::uint64_t frame_seed = 0);

/// Street-like world along a route: a ground plane at z = 0 and rows of
/// buildings of varied size on both sides of the driven path, plus optional
/// moving vehicles. Deterministic in `seed`.
struct StreetWorldOptions {
  double setback_min = 6.0;
  double setback_max = 14.0;
  double spacing = 9.0;
  double building_length_min = 4.0;
  double building_length_max = 12.0;
  double building_height_min = 4.0;
  double building_height_max = 15.0;
  double gap_probability = 0.15;
  int dynamic_objects = 0;
  double dynamic_speed = 8.0;
};
WorldSpec generate_street_world(const GroundTruth& route, const StreetWorldOptions& options,
                                std::uint64_t seed);

}  // namespace lidarloc
