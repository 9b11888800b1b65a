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
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "lidarloc/geom.hpp"

namespace lidarloc {

struct LidarPoint {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();  // sensor frame [m]
  double timestamp = 0.0;                               // [s]
  double doppler = 0.0;                                 // radial velocity [m/s]
  std::optional<Eigen::Vector3d> normal;
  std::optional<double> planarity;
};

struct LidarFrame {
  std::vector<LidarPoint> points;
  double t_start = 0.0;
  double t_end = 0.0;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  /// Same time bounds, no points.
  LidarFrame EmptyCopy() const { return LidarFrame{{}, t_start, t_end}; }
};

/// Throws InvalidArgumentError when t_end <= t_start or a timestamp is outside
/// the frame bounds.
void ValidateFrame(const LidarFrame& frame);

struct GyroSample {
  double stamp = 0.0;
  Eigen::Vector3d rate = Eigen::Vector3d::Zero();  // sensor frame [rad/s]
};

/// Range-dependent Doppler bias: bias(r) = slope * r + intercept.
struct DopplerBiasModel {
  double slope = 0.0;      // (m/s)/m
  double intercept = 0.0;  // m/s
};

struct BiasSample {
  double range = 0.0;
  double residual = 0.0;
};

namespace sensor_fov {
inline constexpr double kHorizontalDeg = 120.0;
inline constexpr double kVerticalDeg = 30.0;
}  // namespace sensor_fov

struct PreprocessDefaults {
  static constexpr double kVoxelSize = 0.5;
  static constexpr std::size_t kAzimuthBins = 240;
  static constexpr std::size_t kElevationBins = 60;
  static constexpr std::size_t kNeighbors = 20;
  static constexpr double kPlanarityThreshold = 0.95;
};

/// Keeps, per occupied voxel, the point closest to the voxel centre (lowest
/// input index on ties). Output preserves input order.
LidarFrame voxel_downsample(const LidarFrame& frame, double voxel_size);

/// Keeps the first point seen in each azimuth/elevation cell of the sensor
/// field of view; points outside the field of view are dropped.
LidarFrame azel_downsample(const LidarFrame& frame, std::size_t az_bins, std::size_t el_bins);

/// PCA over each point's k-neighbourhood. Attaches the smallest-eigenvalue
/// eigenvector (oriented toward the sensor origin) as the normal and
/// 1 - l_min / l_mid as the planarity score, then keeps points scoring above
/// `score_threshold`. Rank-deficient neighbourhoods are dropped.
LidarFrame extract_planar_features(const LidarFrame& frame, std::size_t k_neighbors,
                                   double score_threshold);

DopplerBiasModel fit_doppler_bias(std::span<const BiasSample> samples);
LidarFrame apply_doppler_bias(const LidarFrame& frame, const DopplerBiasModel& model);

/// Re-expresses points (and normals) through `transform`.
LidarFrame transform_frame(const LidarFrame& frame, const Pose& transform);

// Binary frame files ("DLP1"): little-endian, header of magic, u64 count,
// f64 t_start, f64 t_end; then x, y, z, timestamp, doppler as f64 per point.
void write_frame(const std::filesystem::path& path, const LidarFrame& frame);
LidarFrame read_frame(const std::filesystem::path& path);

}  // namespace lidarloc
