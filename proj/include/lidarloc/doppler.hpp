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
#include <span>
#include <vector>

#include "lidarloc/cloud.hpp"
#include "lidarloc/geom.hpp"

namespace lidarloc {

/// Boundary velocity state. `information` is the marginal information of
/// `twist`, carried forward as the prior for the next solve.
struct VelocityState {
  Twist twist = Twist::Zero();
  double stamp = 0.0;
  Matrix6d information = Matrix6d::Zero();
};

struct DopplerConfig {
  Matrix6d Qc = (Vector6d() << 1, 1, 1, 0.1, 0.1, 0.1).finished().asDiagonal();
  Eigen::Matrix4d Qz = Eigen::Matrix4d::Identity() * 1e-4;
  double R_dop = 0.2 * 0.2;
  Eigen::Matrix3d R_gyro = Eigen::Matrix3d::Identity() * (0.01 * 0.01);
  /// Maps sensor-frame points into the vehicle frame.
  Pose T_vehicle_sensor;
  Eigen::Vector3d gyro_bias = Eigen::Vector3d::Zero();
  /// Prior covariance of the very first velocity state.
  Matrix6d initial_covariance = Matrix6d::Identity() * 100.0;
  int ransac_iterations = 100;
  double ransac_threshold = 0.3;
  std::uint64_t ransac_seed = 0;
  double forward_gate = 3.0;
  int integration_steps = 10;
  std::size_t azimuth_bins = 240;
  std::size_t elevation_bins = 60;

  /// Throws ConfigError naming the offending field.
  void Validate() const;
};

struct RansacResult {
  std::vector<std::size_t> inliers;  // ascending frame indices
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();  // sensor frame
};

/// Three-point RANSAC on y = q^T v / |q| followed by a least-squares refit on
/// the largest consensus set.
RansacResult ransac_doppler_inliers(const LidarFrame& frame, const DopplerConfig& config,
                                    std::uint64_t seed);

/// True when the forward-speed change is within `gate`.
bool forward_velocity_gate(const Twist& current, const Twist& previous, double gate);

/// Linear system over the stacked boundary twists [w_{r-1}; w_r].
struct VelocitySystem {
  Eigen::Matrix<double, 12, 12> A = Eigen::Matrix<double, 12, 12>::Zero();
  Eigen::Matrix<double, 12, 1> b = Eigen::Matrix<double, 12, 1>::Zero();

  VelocitySystem& operator+=(const VelocitySystem& other) {
    A += other.A;
    b += other.b;
    return *this;
  }
};

/// Interpolation weight of `t` between the boundary stamps.
double velocity_alpha(double t, double t_prev, double t_curr);

/// Doppler row g with y = g^T w(t) for a sensor-frame point.
Vector6d doppler_row(const Eigen::Vector3d& point, const AdjointMap& Ad_sv);

/// Gyro residual y - bias - C_sv D w(t) and its Jacobian w.r.t. [w_{r-1}; w_r].
Eigen::Vector3d gyro_residual(const GyroSample& sample, const Twist& w_prev, const Twist& w_curr,
                              double t_prev, double t_curr, const DopplerConfig& config);
Eigen::Matrix<double, 3, 12> gyro_residual_jacobian(const GyroSample& sample, double t_prev,
                                                     double t_curr, const DopplerConfig& config);

/// Assembles prior, motion-prior, kinematic, Doppler, and gyro factors for the
/// frame ending at frame.t_end.
VelocitySystem assemble_velocity_system(const LidarFrame& frame,
                                        std::span<const GyroSample> gyro,
                                        const VelocityState& previous,
                                        const DopplerConfig& config);

struct VelocitySolve {
  Eigen::Matrix<double, 12, 1> stacked = Eigen::Matrix<double, 12, 1>::Zero();
  VelocityState current;
};

/// One linear solve. Throws RankDeficiencyError when the system is singular.
VelocitySolve solve_velocity_system(const LidarFrame& frame, std::span<const GyroSample> gyro,
                                    const VelocityState& previous, const DopplerConfig& config);

VelocityState solve_velocity(const LidarFrame& frame, std::span<const GyroSample> gyro,
                             const VelocityState& previous, const DopplerConfig& config);

/// Relative pose T_{r-1,r} from S right-multiplied steps of the linearly
/// interpolated twist.
Pose integrate_pose(const VelocityState& prev, const VelocityState& curr, int steps);

struct DopplerStep {
  Pose delta;  // T_{r-1,r}
  VelocityState state;
  bool gated = false;
  std::size_t inliers = 0;
};

/// Frame-by-frame Doppler odometry: downsampling, bias correction, RANSAC,
/// forward gate, velocity solve and integration.
class DopplerOdometry {
 public:
  explicit DopplerOdometry(DopplerConfig config, DopplerBiasModel bias = {});

  DopplerStep Process(const LidarFrame& frame, std::span<const GyroSample> gyro);

  const VelocityState& state() const { return state_; }
  std::size_t frames_processed() const { return frames_; }

 private:
  DopplerConfig config_;
  DopplerBiasModel bias_;
  VelocityState state_;
  std::size_t frames_ = 0;
};

}  // namespace lidarloc
