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

#include "lidarloc/doppler.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "lidarloc/error.hpp"
#include "reduce.hpp"

namespace lidarloc {

namespace {

constexpr double kMinRange = 1e-9;
constexpr double kMinRcond = 1e-14;
constexpr double kStampSlack = 1e-9;

void RequireSpd(const Eigen::MatrixXd& m, const char* key) {
  if (!m.allFinite() || (m - m.transpose()).norm() > 1e-12 * (1.0 + m.norm())) {
    throw ConfigError(std::string("doppler.") + key + " must be symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    throw ConfigError(std::string("doppler.") + key + " must be positive definite");
  }
}

// Rows of the kinematic selection: vy, vz, wx, wy.
Eigen::Matrix<double, 4, 6> KinematicSelection() {
  Eigen::Matrix<double, 4, 6> H = Eigen::Matrix<double, 4, 6>::Zero();
  H(0, twist_index::kVy) = 1.0;
  H(1, twist_index::kVz) = 1.0;
  H(2, twist_index::kWx) = 1.0;
  H(3, twist_index::kWy) = 1.0;
  return H;
}

// d(C_sv D w(t)) / d[w_{r-1}; w_r]
Eigen::Matrix<double, 3, 12> GyroModelJacobian(double alpha, const Eigen::Matrix3d& C_sv) {
  Eigen::Matrix<double, 3, 12> J = Eigen::Matrix<double, 3, 12>::Zero();
  J.block<3, 3>(0, 3) = (1.0 - alpha) * C_sv;
  J.block<3, 3>(0, 9) = alpha * C_sv;
  return J;
}

double CheckedAlpha(double t, double t_prev, double t_curr, const char* what) {
  const double alpha = velocity_alpha(t, t_prev, t_curr);
  const double slack = kStampSlack / (t_curr - t_prev);
  if (alpha < -slack || alpha > 1.0 + slack) {
    throw InvalidArgumentError(std::string(what) + " stamp " + std::to_string(t) +
                               " is outside the solve window");
  }
  return std::clamp(alpha, 0.0, 1.0);
}

}  // namespace

void DopplerConfig::Validate() const {
  RequireSpd(Qc, "Qc");
  RequireSpd(Qz, "Qz");
  RequireSpd(R_gyro, "R_gyro");
  RequireSpd(initial_covariance, "initial_covariance");
  if (!(R_dop > 0.0)) throw ConfigError("doppler.R_dop must be positive");
  if (ransac_iterations < 1) throw ConfigError("doppler.ransac_iterations must be >= 1");
  if (!(ransac_threshold > 0.0)) throw ConfigError("doppler.ransac_threshold must be positive");
  if (!(forward_gate > 0.0)) throw ConfigError("doppler.forward_gate must be positive");
  if (integration_steps < 1) throw ConfigError("doppler.integration_steps must be >= 1");
  if (azimuth_bins < 1 || elevation_bins < 1) {
    throw ConfigError("doppler.azimuth_bins and doppler.elevation_bins must be >= 1");
  }
}

RansacResult ransac_doppler_inliers(const LidarFrame& frame, const DopplerConfig& config,
                                    std::uint64_t seed) {
  std::vector<std::size_t> usable;
  std::vector<Eigen::Vector3d> dirs;
  for (std::size_t i = 0; i < frame.size(); ++i) {
    const double r = frame.points[i].position.norm();
    if (r > kMinRange) {
      usable.push_back(i);
      dirs.push_back(frame.points[i].position / r);
    }
  }
  if (usable.size() < 3) {
    throw InsufficientDataError("ransac needs at least 3 points with nonzero range, got " +
                                std::to_string(usable.size()));
  }

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, usable.size() - 1);
  std::vector<std::size_t> best;
  std::vector<std::size_t> candidate;
  Eigen::Vector3d best_v = Eigen::Vector3d::Zero();
  for (int it = 0; it < config.ransac_iterations; ++it) {
    const std::size_t a = pick(rng);
    std::size_t b = pick(rng);
    std::size_t c = pick(rng);
    if (a == b || a == c || b == c) continue;
    Eigen::Matrix3d M;
    M.row(0) = dirs[a].transpose();
    M.row(1) = dirs[b].transpose();
    M.row(2) = dirs[c].transpose();
    if (std::abs(M.determinant()) < 1e-9) continue;
    const Eigen::Vector3d y(frame.points[usable[a]].doppler, frame.points[usable[b]].doppler,
                            frame.points[usable[c]].doppler);
    const Eigen::Vector3d v = M.partialPivLu().solve(y);
    candidate.clear();
    for (std::size_t k = 0; k < usable.size(); ++k) {
      if (std::abs(frame.points[usable[k]].doppler - dirs[k].dot(v)) < config.ransac_threshold) {
        candidate.push_back(k);
      }
    }
    if (candidate.size() > best.size()) {
      best.swap(candidate);
      best_v = v;
    }
  }
  if (best.size() < 3) {
    throw DegenerateFitError("ransac found no well-conditioned consensus set");
  }

  Eigen::Matrix3d N = Eigen::Matrix3d::Zero();
  Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
  RansacResult result;
  result.inliers.reserve(best.size());
  for (std::size_t k : best) {
    N += dirs[k] * dirs[k].transpose();
    rhs += dirs[k] * frame.points[usable[k]].doppler;
    result.inliers.push_back(usable[k]);
  }
  Eigen::LDLT<Eigen::Matrix3d> ldlt(N);
  result.velocity = (ldlt.info() == Eigen::Success && ldlt.rcond() > 1e-12) ? ldlt.solve(rhs)
                                                                              : best_v;
  return result;
}

bool forward_velocity_gate(const Twist& current, const Twist& previous, double gate) {
  return std::abs(current(twist_index::kVx) - previous(twist_index::kVx)) <= gate;
}

double velocity_alpha(double t, double t_prev, double t_curr) {
  return (t - t_prev) / (t_curr - t_prev);
}

Vector6d doppler_row(const Eigen::Vector3d& point, const AdjointMap& Ad_sv) {
  const Eigen::Vector3d q = point.normalized();
  return Ad_sv.topRows<3>().transpose() * q;
}

Eigen::Vector3d gyro_residual(const GyroSample& sample, const Twist& w_prev, const Twist& w_curr,
                              double t_prev, double t_curr, const DopplerConfig& config) {
  const double alpha = velocity_alpha(sample.stamp, t_prev, t_curr);
  const Eigen::Matrix3d C_sv = config.T_vehicle_sensor.rotation().transpose();
  const Eigen::Vector3d omega = (1.0 - alpha) * angular(w_prev) + alpha * angular(w_curr);
  return sample.rate - config.gyro_bias - C_sv * omega;
}

Eigen::Matrix<double, 3, 12> gyro_residual_jacobian(const GyroSample& sample, double t_prev,
                                                     double t_curr, const DopplerConfig& config) {
  const double alpha = velocity_alpha(sample.stamp, t_prev, t_curr);
  return -GyroModelJacobian(alpha, config.T_vehicle_sensor.rotation().transpose());
}

VelocitySystem assemble_velocity_system(const LidarFrame& frame,
                                        std::span<const GyroSample> gyro,
                                        const VelocityState& previous,
                                        const DopplerConfig& config) {
  const double t_prev = previous.stamp;
  const double t_curr = frame.t_end;
  if (!(t_curr > t_prev)) {
    throw InvalidArgumentError("velocity solve needs frame.t_end after the previous stamp");
  }
  const double dt = t_curr - t_prev;

  VelocitySystem sys;
  sys.A.topLeftCorner<6, 6>() += previous.information;
  sys.b.head<6>() += previous.information * previous.twist;

  const Matrix6d Qr_inv = (dt * config.Qc).inverse();
  sys.A.topLeftCorner<6, 6>() += Qr_inv;
  sys.A.topRightCorner<6, 6>() -= Qr_inv;
  sys.A.bottomLeftCorner<6, 6>() -= Qr_inv;
  sys.A.bottomRightCorner<6, 6>() += Qr_inv;

  const Eigen::Matrix<double, 4, 6> H = KinematicSelection();
  sys.A.bottomRightCorner<6, 6>() += H.transpose() * config.Qz.inverse() * H;

  const AdjointMap Ad_sv = adjoint(config.T_vehicle_sensor.inverse());
  const double w_dop = 1.0 / config.R_dop;
  for (const LidarPoint& p : frame.points) CheckedAlpha(p.timestamp, t_prev, t_curr, "point");
  sys += detail::blocked_tree_sum(
      frame.size(), VelocitySystem{}, [&](std::size_t begin, std::size_t end, VelocitySystem& acc) {
        Eigen::Matrix<double, 12, 1> J;
        for (std::size_t i = begin; i < end; ++i) {
          const LidarPoint& p = frame.points[i];
          if (p.position.norm() <= kMinRange) continue;
          const double alpha = std::clamp(velocity_alpha(p.timestamp, t_prev, t_curr), 0.0, 1.0);
          const Vector6d g = doppler_row(p.position, Ad_sv);
          J << (1.0 - alpha) * g, alpha * g;
          acc.A.selfadjointView<Eigen::Upper>().rankUpdate(J, w_dop);
          acc.b += (w_dop * p.doppler) * J;
        }
      });
  // rankUpdate only fills the upper triangle.
  sys.A.triangularView<Eigen::StrictlyLower>() = sys.A.transpose().triangularView<Eigen::StrictlyLower>();

  const Eigen::Matrix3d C_sv = config.T_vehicle_sensor.rotation().transpose();
  const Eigen::Matrix3d R_inv = config.R_gyro.inverse();
  for (const GyroSample& s : gyro) {
    const double alpha = CheckedAlpha(s.stamp, t_prev, t_curr, "gyro");
    const Eigen::Matrix<double, 3, 12> J = GyroModelJacobian(alpha, C_sv);
    sys.A += J.transpose() * R_inv * J;
    sys.b += J.transpose() * R_inv * (s.rate - config.gyro_bias);
  }
  return sys;
}

VelocitySolve solve_velocity_system(const LidarFrame& frame, std::span<const GyroSample> gyro,
                                    const VelocityState& previous, const DopplerConfig& config) {
  const VelocitySystem sys = assemble_velocity_system(frame, gyro, previous, config);
  Eigen::LLT<Eigen::Matrix<double, 12, 12>> llt(sys.A);
  if (llt.info() != Eigen::Success || !(llt.rcond() > kMinRcond)) {
    throw RankDeficiencyError("velocity normal equations are singular");
  }
  VelocitySolve out;
  out.stacked = llt.solve(sys.b);
  const Eigen::Matrix<double, 12, 12> cov = llt.solve(Eigen::Matrix<double, 12, 12>::Identity());
  const Matrix6d marginal = cov.bottomRightCorner<6, 6>().inverse();
  out.current.twist = out.stacked.tail<6>();
  out.current.stamp = frame.t_end;
  out.current.information = 0.5 * (marginal + marginal.transpose());
  return out;
}

VelocityState solve_velocity(const LidarFrame& frame, std::span<const GyroSample> gyro,
                             const VelocityState& previous, const DopplerConfig& config) {
  return solve_velocity_system(frame, gyro, previous, config).current;
}

Pose integrate_pose(const VelocityState& prev, const VelocityState& curr, int steps) {
  if (steps < 1) throw InvalidArgumentError("integration steps must be >= 1");
  if (!(curr.stamp > prev.stamp)) throw InvalidArgumentError("integration needs increasing stamps");
  const double dt = (curr.stamp - prev.stamp) / steps;
  Pose T = Pose::Identity();
  for (int i = 1; i <= steps; ++i) {
    const double alpha = static_cast<double>(i) / steps;
    T = T * exp_map(dt * ((1.0 - alpha) * prev.twist + alpha * curr.twist));
  }
  return T;
}

DopplerOdometry::DopplerOdometry(DopplerConfig config, DopplerBiasModel bias)
    : config_(std::move(config)), bias_(bias) {
  config_.Validate();
}

DopplerStep DopplerOdometry::Process(const LidarFrame& frame, std::span<const GyroSample> gyro) {
  ValidateFrame(frame);
  if (frames_ == 0) {
    state_.twist = Twist::Zero();
    state_.stamp = frame.t_start;
    state_.information = config_.initial_covariance.inverse();
  }
  const LidarFrame corrected = apply_doppler_bias(
      azel_downsample(frame, config_.azimuth_bins, config_.elevation_bins), bias_);

  LidarFrame inliers = corrected.EmptyCopy();
  try {
    const RansacResult ransac = ransac_doppler_inliers(corrected, config_, config_.ransac_seed + frames_);
    inliers.points.reserve(ransac.inliers.size());
    for (std::size_t i : ransac.inliers) inliers.points.push_back(corrected.points[i]);
  } catch (const InsufficientDataError&) {
  } catch (const DegenerateFitError&) {
  }

  DopplerStep step;
  step.inliers = inliers.size();
  VelocityState current = solve_velocity(inliers, gyro, state_, config_);
  if (frames_ > 0 && !forward_velocity_gate(current.twist, state_.twist, config_.forward_gate)) {
    step.gated = true;
    current.twist = state_.twist;
    current.information = state_.information;
  }
  step.delta = integrate_pose(state_, current, config_.integration_steps);
  step.state = current;
  state_ = current;
  ++frames_;
  return step;
}

}  // namespace lidarloc
