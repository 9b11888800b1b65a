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
#include <array>
#include <cstddef>
#include <deque>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "lidarloc/cloud.hpp"
#include "lidarloc/geom.hpp"
#include "lidarloc/kdtree.hpp"

namespace lidarloc {

using Matrix12d = Eigen::Matrix<double, 12, 12>;
using Matrix24d = Eigen::Matrix<double, 24, 24>;
using Vector24d = Eigen::Matrix<double, 24, 1>;
using StateJacobian = Eigen::Matrix<double, 6, 24>;

/// GP knot. `pose` maps vehicle coordinates into the odometry (map) frame.
struct TrajectoryKnot {
  Pose pose;
  Twist twist = Twist::Zero();
  double stamp = 0.0;
};
using KnotPair = std::array<TrajectoryKnot, 2>;

struct InterpolatedState {
  Pose pose;
  Twist twist = Twist::Zero();
};

/// Posterior-mean interpolation between two knots under the
/// white-noise-on-acceleration prior. Throws DomainError outside the interval.
InterpolatedState interpolate_state(const KnotPair& knots, double t);

/// Scalar interpolation weights for a two-knot window of length T at offset s.
struct InterpolationWeights {
  double lambda12 = 0.0;
  double lambda22 = 0.0;
  double psi11 = 0.0;
  double psi12 = 0.0;
  double psi21 = 0.0;
  double psi22 = 0.0;
};
InterpolationWeights interpolation_weights(double s, double T);

struct IcpConfig {
  Matrix6d Qc = (Vector6d() << 1, 1, 1, 0.1, 0.1, 0.1).finished().asDiagonal();
  Eigen::Matrix3d R_icp = Eigen::Matrix3d::Identity() * (0.1 * 0.1);
  /// Off-normal weight fraction in the point-to-plane weighting.
  double normal_epsilon = 1e-3;
  Eigen::Matrix3d R_gyro = Eigen::Matrix3d::Identity() * (0.01 * 0.01);
  Eigen::Vector3d gyro_bias = Eigen::Vector3d::Zero();
  bool use_gyro = true;
  int max_iterations = 20;
  double pose_tolerance = 1e-6;
  double twist_tolerance = 1e-6;
  /// Three non-decreasing costs flag divergence only once the total rise
  /// exceeds this fraction of the starting cost.
  double divergence_rise = 0.1;
  double max_correspondence_distance = 1.0;
  /// When positive, a second stage drops matches farther from the map plane
  /// than max(sigmas * 1.4826 * median, floor). Zero disables it.
  double outlier_gate_sigmas = 0.0;
  double min_outlier_gate = 1e-3;
  std::size_t min_correspondences = 10;
  std::size_t map_span = 3;
  /// Maps sensor-frame points into the vehicle frame.
  Pose T_vehicle_sensor;
  double voxel_size = 0.5;
  std::size_t k_neighbors = 20;
  double planarity_threshold = 0.95;
  /// Prior covariance of the first knot (pose then twist).
  Matrix12d initial_covariance =
      (Eigen::Matrix<double, 12, 1>() << Eigen::Matrix<double, 6, 1>::Constant(1e-8),
       Eigen::Matrix<double, 6, 1>::Constant(100.0))
          .finished()
          .asDiagonal();

  /// Throws ConfigError naming the offending field.
  void Validate() const;
};

struct MapMatch {
  Eigen::Vector3d point;
  Eigen::Vector3d normal;
  std::size_t index = 0;
  double distance = 0.0;
};

/// Sliding window of recent frames in the odometry frame with an exact
/// nearest-neighbour index.
class LocalMap {
 public:
  LocalMap() = default;
  /// Static map from points and unit normals (throws InvalidArgumentError on
  /// size mismatch or non-unit normals).
  LocalMap(std::vector<Eigen::Vector3d> points, std::vector<Eigen::Vector3d> normals);

  /// Adds points carrying normals, transformed by `T_map_sensor`, then drops
  /// whole frames until at most `span` remain.
  void Insert(const LidarFrame& frame, const Pose& T_map_sensor, std::size_t span);

  std::optional<MapMatch> Nearest(const Eigen::Vector3d& query, double max_distance) const;

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const std::vector<Eigen::Vector3d>& points() const { return points_; }
  const std::vector<Eigen::Vector3d>& normals() const { return normals_; }
  const std::deque<std::size_t>& frame_sizes() const { return frame_sizes_; }

 private:
  void Rebuild();

  std::vector<Eigen::Vector3d> points_;
  std::vector<Eigen::Vector3d> normals_;
  std::deque<std::size_t> frame_sizes_;
  std::unique_ptr<KdTree> tree_;
};

std::optional<MapMatch> associate(const Eigen::Vector3d& point_in_map, const LocalMap& map,
                                  double max_distance);

LocalMap update_local_map(LocalMap map, const LidarFrame& frame, const Pose& T_map_sensor,
                          std::size_t span);

/// Point-to-plane information matrix for a map normal.
Eigen::Matrix3d point_to_plane_weight(const Eigen::Vector3d& normal, const IcpConfig& config);

// Residuals and Jacobians w.r.t. the 24-dimensional knot perturbation
// [dP1, dw1, dP2, dw2], with poses perturbed on the right.
Eigen::Vector3d icp_point_residual(const KnotPair& knots, double stamp,
                                   const Eigen::Vector3d& point_sensor,
                                   const Eigen::Vector3d& map_point, const IcpConfig& config);
Eigen::Matrix<double, 3, 24> icp_point_jacobian(const KnotPair& knots, double stamp,
                                                const Eigen::Vector3d& point_sensor,
                                                const IcpConfig& config);
Eigen::Vector3d icp_gyro_residual(const KnotPair& knots, const GyroSample& sample,
                                  const IcpConfig& config);
Eigen::Matrix<double, 3, 24> icp_gyro_jacobian(const KnotPair& knots, const GyroSample& sample,
                                               const IcpConfig& config);
Eigen::Matrix<double, 12, 1> motion_prior_residual(const KnotPair& knots);
Eigen::Matrix<double, 12, 24> motion_prior_jacobian(const KnotPair& knots);
/// Inverse covariance of the motion prior over a window of length dt.
Matrix12d motion_prior_information(double dt, const Matrix6d& Qc);

/// Applies a 24-dimensional perturbation to the knots.
KnotPair perturb_knots(const KnotPair& knots, const Vector24d& delta);

struct IcpResult {
  KnotPair knots;
  Pose delta;  // T_{r-1,r}: maps frame-r vehicle coordinates into frame r-1
  int iterations = 0;
  bool converged = false;
  bool diverged = false;
  std::size_t correspondences = 0;
  double cost = 0.0;
  /// Cost at each linearization point, one entry per iteration.
  std::vector<double> cost_history;
  /// Marginal information of the second knot, for the next window's prior.
  Matrix12d information = Matrix12d::Zero();
};

/// Gauss-Newton with nearest-neighbour re-association each iteration.
/// `knots[0]` is both the initial guess and the mean of the unary prior with
/// `prior_information`; `knots[1]` is the initial guess for the frame end.
/// Throws InsufficientDataError when an iteration finds fewer than
/// config.min_correspondences matches.
IcpResult icp_odometry_step(const LidarFrame& frame, const LocalMap& map,
                            std::span<const GyroSample> gyro, const KnotPair& knots,
                            const Matrix12d& prior_information, const IcpConfig& config);

/// Re-expresses every point in the sensor frame at knots[1].stamp.
LidarFrame undistort(const LidarFrame& frame, const KnotPair& knots, const Pose& T_vehicle_sensor);

/// voxel_downsample followed by extract_planar_features.
LidarFrame preprocess_icp_frame(const LidarFrame& frame, const IcpConfig& config);

struct IcpStep {
  Pose delta;  // T_{r-1,r}
  TrajectoryKnot knot;
  IcpResult result;
  LidarFrame undistorted;  // sensor frame at the frame end
  /// Set on the second frame: the first frame re-undistorted with the
  /// bootstrapped twist, replacing its zero-twist `undistorted`.
  std::optional<LidarFrame> refined_first;
};

class IcpOdometry {
 public:
  explicit IcpOdometry(IcpConfig config);

  /// The first frame only seeds the map and returns an identity delta. The
  /// second frame's twist estimate is used to re-undistort the first frame and
  /// rebuild the map before the second frame is registered again.
  IcpStep Process(const LidarFrame& frame, std::span<const GyroSample> gyro);

  const LocalMap& map() const { return map_; }
  const TrajectoryKnot& knot() const { return knot_; }
  std::size_t frames_processed() const { return frames_; }

 private:
  IcpConfig config_;
  LocalMap map_;
  TrajectoryKnot knot_;
  Matrix12d information_ = Matrix12d::Zero();
  LidarFrame first_features_;
  std::size_t frames_ = 0;
};

}  // namespace lidarloc
