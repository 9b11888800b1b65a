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

#include "lidarloc/icp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "lidarloc/error.hpp"
#include "reduce.hpp"
#include "robust_gate.hpp"

namespace lidarloc {

namespace {

constexpr double kStampSlack = 1e-9;
constexpr std::size_t kGroupsPerBlock = 8;
constexpr int kBootstrapPasses = 5;
constexpr double kBootstrapTolerance = 1e-3;

void RequireSpd(const Eigen::MatrixXd& m, const char* key) {
  if (!m.allFinite() || (m - m.transpose()).norm() > 1e-12 * (1.0 + m.norm())) {
    throw ConfigError(std::string("icp.") + key + " must be symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    throw ConfigError(std::string("icp.") + key + " must be positive definite");
  }
}

// Selects one 6-block of the knot perturbation.
StateJacobian Select(int block) {
  StateJacobian E = StateJacobian::Zero();
  E.block<6, 6>(0, 6 * block).setIdentity();
  return E;
}

enum Block { kPose1 = 0, kTwist1 = 1, kPose2 = 2, kTwist2 = 3 };

// Quantities shared by every query time in the window.
struct Window {
  Pose P1;
  double t1 = 0.0;
  double length = 0.0;
  Twist w1 = Twist::Zero();
  Twist w2 = Twist::Zero();
  Vector6d xi21 = Vector6d::Zero();
  Vector6d gamma2 = Vector6d::Zero();
  Matrix6d Jr_inv21 = Matrix6d::Identity();
  StateJacobian d_xi21 = StateJacobian::Zero();
  StateJacobian d_gamma2 = StateJacobian::Zero();
};

Window MakeWindow(const KnotPair& knots, bool with_jacobians) {
  Window w;
  w.P1 = knots[0].pose;
  w.t1 = knots[0].stamp;
  w.length = knots[1].stamp - knots[0].stamp;
  if (!(w.length > 0.0)) throw InvalidArgumentError("knot stamps must be strictly increasing");
  w.w1 = knots[0].twist;
  w.w2 = knots[1].twist;
  w.xi21 = log_map(knots[0].pose.inverse() * knots[1].pose);
  w.Jr_inv21 = right_jacobian_inverse(w.xi21);
  w.gamma2 = w.Jr_inv21 * w.w2;
  if (with_jacobians) {
    w.d_xi21 = w.Jr_inv21 * Select(kPose2) - left_jacobian_inverse(w.xi21) * Select(kPose1);
    w.d_gamma2 = right_jacobian_inverse_times_derivative(w.xi21, w.w2) * w.d_xi21 +
                 w.Jr_inv21 * Select(kTwist2);
  }
  return w;
}

struct LocalState {
  Vector6d xi = Vector6d::Zero();
  Vector6d xi_dot = Vector6d::Zero();
  StateJacobian d_xi = StateJacobian::Zero();
  StateJacobian d_xi_dot = StateJacobian::Zero();
};

LocalState Evaluate(const Window& w, double t, bool with_jacobians) {
  const double s = t - w.t1;
  if (s < -kStampSlack || s > w.length + kStampSlack) {
    throw DomainError("interpolation time " + std::to_string(t) + " is outside the knot window");
  }
  const InterpolationWeights c = interpolation_weights(std::clamp(s, 0.0, w.length), w.length);
  LocalState out;
  out.xi = c.lambda12 * w.w1 + c.psi11 * w.xi21 + c.psi12 * w.gamma2;
  out.xi_dot = c.lambda22 * w.w1 + c.psi21 * w.xi21 + c.psi22 * w.gamma2;
  if (with_jacobians) {
    const StateJacobian E_w1 = Select(kTwist1);
    out.d_xi = c.lambda12 * E_w1 + c.psi11 * w.d_xi21 + c.psi12 * w.d_gamma2;
    out.d_xi_dot = c.lambda22 * E_w1 + c.psi21 * w.d_xi21 + c.psi22 * w.d_gamma2;
  }
  return out;
}

// Jacobian of the right perturbation of P(t) = P1 exp(xi).
StateJacobian PoseJacobian(const LocalState& st) {
  return adjoint(exp_map(-st.xi)) * Select(kPose1) + right_jacobian(st.xi) * st.d_xi;
}

Eigen::Matrix<double, 3, 6> PointJacobian(const Eigen::Matrix3d& C, const Eigen::Vector3d& x) {
  return -C * odot(x);
}

struct Accumulator {
  Matrix24d A = Matrix24d::Zero();
  Vector24d b = Vector24d::Zero();
  double cost = 0.0;
  std::size_t matches = 0;
  std::size_t beyond_gate = 0;

  Accumulator& operator+=(const Accumulator& o) {
    A += o.A;
    b += o.b;
    cost += o.cost;
    matches += o.matches;
    return *this;
  }
};

struct TimeGroup {
  double stamp;
  std::size_t begin;
  std::size_t end;
};

std::vector<TimeGroup> GroupByStamp(const LidarFrame& frame, std::vector<std::size_t>* order) {
  order->resize(frame.size());
  std::iota(order->begin(), order->end(), 0);
  std::stable_sort(order->begin(), order->end(), [&](std::size_t a, std::size_t b) {
    return frame.points[a].timestamp < frame.points[b].timestamp;
  });
  std::vector<TimeGroup> groups;
  for (std::size_t i = 0; i < order->size();) {
    const double t = frame.points[(*order)[i]].timestamp;
    std::size_t j = i;
    while (j < order->size() && frame.points[(*order)[j]].timestamp == t) ++j;
    groups.push_back({t, i, j});
    i = j;
  }
  return groups;
}

// Adds a weighted residual block: cost, A += J^T W J, b -= J^T W e.
template <int Rows>
void AddFactor(const Eigen::Matrix<double, Rows, 1>& e, const Eigen::Matrix<double, Rows, 24>& J,
               const Eigen::Matrix<double, Rows, Rows>& W, Accumulator* acc) {
  const Eigen::Matrix<double, 24, Rows> JtW = J.transpose() * W;
  acc->A += JtW * J;
  acc->b -= JtW * e;
  acc->cost += e.dot(W * e);
}

Accumulator BuildSystem(const LidarFrame& frame, const std::vector<std::size_t>& order,
                        const std::vector<TimeGroup>& groups, const LocalMap& map,
                        std::span<const GyroSample> gyro, const KnotPair& knots,
                        const KnotPair& prior_mean, const Matrix12d& prior_information,
                        const IcpConfig& config, bool gated) {
  const Window w = MakeWindow(knots, true);
  const Pose& T_vs = config.T_vehicle_sensor;

  // Pass 1: interpolate once per timestamp and associate every point.
  struct Match {
    bool valid = false;
    Eigen::Vector3d point;
    Eigen::Vector3d normal;
    double normal_residual = 0.0;
  };
  std::vector<Match> matches(order.size());
  std::vector<LocalState> states(groups.size());
  std::vector<Pose> poses(groups.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t gi = 0; gi < static_cast<std::ptrdiff_t>(groups.size()); ++gi) {
    const auto g = static_cast<std::size_t>(gi);
    states[g] = Evaluate(w, groups[g].stamp, true);
    poses[g] = w.P1 * exp_map(states[g].xi);
    for (std::size_t k = groups[g].begin; k < groups[g].end; ++k) {
      const Eigen::Vector3d world = poses[g] * (T_vs * frame.points[order[k]].position);
      const auto hit = map.Nearest(world, config.max_correspondence_distance);
      if (!hit) continue;
      matches[k] = {true, hit->point, hit->normal, std::abs(hit->normal.dot(hit->point - world))};
    }
  }

  std::vector<double> abs_residuals;
  for (const Match& m : matches) {
    if (m.valid) abs_residuals.push_back(m.normal_residual);
  }
  const detail::RobustGate robust =
      detail::robust_gate(std::move(abs_residuals), config.outlier_gate_sigmas,
                          config.min_outlier_gate);
  const double gate = gated ? robust.threshold : std::numeric_limits<double>::infinity();
  const std::size_t beyond_gate = robust.beyond;

  // Pass 2: per-timestamp 6x6 blocks mapped through the interpolation Jacobian.
  Accumulator total = detail::blocked_tree_sum(
      groups.size(), Accumulator{},
      [&](std::size_t gb, std::size_t ge, Accumulator& acc) {
        for (std::size_t g = gb; g < ge; ++g) {
          const Pose& P = poses[g];
          Matrix6d H = Matrix6d::Zero();
          Vector6d grad = Vector6d::Zero();
          bool any = false;
          for (std::size_t k = groups[g].begin; k < groups[g].end; ++k) {
            const Match& m = matches[k];
            if (!m.valid || m.normal_residual > gate) continue;
            const Eigen::Vector3d x = T_vs * frame.points[order[k]].position;
            const Eigen::Vector3d e = m.point - P * x;
            const Eigen::Matrix3d W = point_to_plane_weight(m.normal, config);
            const Eigen::Matrix<double, 3, 6> J = PointJacobian(P.rotation(), x);
            const Eigen::Matrix<double, 6, 3> JtW = J.transpose() * W;
            H += JtW * J;
            grad += JtW * e;
            acc.cost += e.dot(W * e);
            ++acc.matches;
            any = true;
          }
          if (!any) continue;
          const StateJacobian M = PoseJacobian(states[g]);
          acc.A += M.transpose() * H * M;
          acc.b -= M.transpose() * grad;
        }
      },
      kGroupsPerBlock);
  total.beyond_gate = beyond_gate;

  // Unary prior on the first knot.
  {
    Eigen::Matrix<double, 12, 1> e;
    const Vector6d e_pose = log_map(prior_mean[0].pose.inverse() * knots[0].pose);
    e << e_pose, knots[0].twist - prior_mean[0].twist;
    Eigen::Matrix<double, 12, 24> J = Eigen::Matrix<double, 12, 24>::Zero();
    J.block<6, 6>(0, 0) = right_jacobian_inverse(e_pose);
    J.block<6, 6>(6, 6).setIdentity();
    AddFactor<12>(e, J, prior_information, &total);
  }
  {
    Eigen::Matrix<double, 12, 1> e;
    e << w.xi21 - w.length * w.w1, w.gamma2 - w.w1;
    Eigen::Matrix<double, 12, 24> J;
    J << w.d_xi21 - w.length * Select(kTwist1), w.d_gamma2 - Select(kTwist1);
    AddFactor<12>(e, J, motion_prior_information(w.length, config.Qc), &total);
  }
  if (config.use_gyro) {
    const Eigen::Matrix3d R_inv = config.R_gyro.inverse();
    for (const GyroSample& s : gyro) {
      AddFactor<3>(icp_gyro_residual(knots, s, config), icp_gyro_jacobian(knots, s, config), R_inv,
                   &total);
    }
  }
  return total;
}

}  // namespace

InterpolationWeights interpolation_weights(double s, double T) {
  auto Q = [](double d) {
    Eigen::Matrix2d m;
    m << d * d * d / 3.0, d * d / 2.0, d * d / 2.0, d;
    return m;
  };
  auto Phi = [](double d) {
    Eigen::Matrix2d m;
    m << 1.0, d, 0.0, 1.0;
    return m;
  };
  const Eigen::Matrix2d psi = Q(s) * Phi(T - s).transpose() * Q(T).inverse();
  const Eigen::Matrix2d lambda = Phi(s) - psi * Phi(T);
  InterpolationWeights c;
  c.lambda12 = lambda(0, 1);
  c.lambda22 = lambda(1, 1);
  c.psi11 = psi(0, 0);
  c.psi12 = psi(0, 1);
  c.psi21 = psi(1, 0);
  c.psi22 = psi(1, 1);
  return c;
}

InterpolatedState interpolate_state(const KnotPair& knots, double t) {
  const Window w = MakeWindow(knots, false);
  const LocalState st = Evaluate(w, t, false);
  return {w.P1 * exp_map(st.xi), right_jacobian(st.xi) * st.xi_dot};
}

void IcpConfig::Validate() const {
  RequireSpd(Qc, "Qc");
  RequireSpd(R_icp, "R_icp");
  RequireSpd(R_gyro, "R_gyro");
  RequireSpd(initial_covariance, "initial_covariance");
  if (!(normal_epsilon > 0.0 && normal_epsilon <= 1.0)) {
    throw ConfigError("icp.normal_epsilon must be in (0, 1]");
  }
  if (max_iterations < 1) throw ConfigError("icp.max_iterations must be >= 1");
  if (!(pose_tolerance > 0.0)) throw ConfigError("icp.pose_tolerance must be positive");
  if (!(twist_tolerance > 0.0)) throw ConfigError("icp.twist_tolerance must be positive");
  if (!(divergence_rise >= 0.0)) throw ConfigError("icp.divergence_rise must be non-negative");
  if (!(max_correspondence_distance > 0.0)) {
    throw ConfigError("icp.max_correspondence_distance must be positive");
  }
  if (!(outlier_gate_sigmas >= 0.0)) {
    throw ConfigError("icp.outlier_gate_sigmas must be non-negative");
  }
  if (!(min_outlier_gate >= 0.0)) throw ConfigError("icp.min_outlier_gate must be non-negative");
  if (map_span < 1) throw ConfigError("icp.map_span must be >= 1");
  if (!(voxel_size > 0.0)) throw ConfigError("icp.voxel_size must be positive");
  if (k_neighbors < 3) throw ConfigError("icp.k_neighbors must be >= 3");
  if (!(planarity_threshold >= 0.0 && planarity_threshold < 1.0)) {
    throw ConfigError("icp.planarity_threshold must be in [0, 1)");
  }
}

LocalMap::LocalMap(std::vector<Eigen::Vector3d> points, std::vector<Eigen::Vector3d> normals)
    : points_(std::move(points)), normals_(std::move(normals)) {
  if (points_.size() != normals_.size()) {
    throw InvalidArgumentError("local map needs one normal per point");
  }
  for (const auto& n : normals_) {
    if (std::abs(n.norm() - 1.0) > 1e-6) throw InvalidArgumentError("map normals must be unit");
  }
  frame_sizes_.push_back(points_.size());
  Rebuild();
}

void LocalMap::Insert(const LidarFrame& frame, const Pose& T_map_sensor, std::size_t span) {
  std::size_t added = 0;
  for (const LidarPoint& p : frame.points) {
    if (!p.normal) continue;
    points_.push_back(T_map_sensor * p.position);
    normals_.push_back((T_map_sensor.rotation() * *p.normal).normalized());
    ++added;
  }
  frame_sizes_.push_back(added);
  std::size_t drop = 0;
  while (frame_sizes_.size() > std::max<std::size_t>(span, 1)) {
    drop += frame_sizes_.front();
    frame_sizes_.pop_front();
  }
  if (drop > 0) {
    points_.erase(points_.begin(), points_.begin() + static_cast<std::ptrdiff_t>(drop));
    normals_.erase(normals_.begin(), normals_.begin() + static_cast<std::ptrdiff_t>(drop));
  }
  Rebuild();
}

void LocalMap::Rebuild() {
  tree_ = points_.empty() ? nullptr : std::make_unique<KdTree>(points_);
}

std::optional<MapMatch> LocalMap::Nearest(const Eigen::Vector3d& query,
                                          double max_distance) const {
  if (!tree_) return std::nullopt;
  const auto hit = tree_->Nearest(query, max_distance);
  if (!hit) return std::nullopt;
  return MapMatch{points_[hit->index], normals_[hit->index], hit->index,
                  std::sqrt(hit->squared_distance)};
}

std::optional<MapMatch> associate(const Eigen::Vector3d& point_in_map, const LocalMap& map,
                                  double max_distance) {
  if (map.empty()) throw InvalidArgumentError("association needs a non-empty map");
  return map.Nearest(point_in_map, max_distance);
}

LocalMap update_local_map(LocalMap map, const LidarFrame& frame, const Pose& T_map_sensor,
                          std::size_t span) {
  map.Insert(frame, T_map_sensor, span);
  return map;
}

Eigen::Matrix3d point_to_plane_weight(const Eigen::Vector3d& normal, const IcpConfig& config) {
  const Eigen::Matrix3d nn = normal * normal.transpose();
  const Eigen::Matrix3d root =
      nn + std::sqrt(config.normal_epsilon) * (Eigen::Matrix3d::Identity() - nn);
  return root * config.R_icp.inverse() * root;
}

Eigen::Vector3d icp_point_residual(const KnotPair& knots, double stamp,
                                   const Eigen::Vector3d& point_sensor,
                                   const Eigen::Vector3d& map_point, const IcpConfig& config) {
  const InterpolatedState s = interpolate_state(knots, stamp);
  return map_point - s.pose * (config.T_vehicle_sensor * point_sensor);
}

Eigen::Matrix<double, 3, 24> icp_point_jacobian(const KnotPair& knots, double stamp,
                                                const Eigen::Vector3d& point_sensor,
                                                const IcpConfig& config) {
  const Window w = MakeWindow(knots, true);
  const LocalState st = Evaluate(w, stamp, true);
  const Pose P = w.P1 * exp_map(st.xi);
  return PointJacobian(P.rotation(), config.T_vehicle_sensor * point_sensor) * PoseJacobian(st);
}

Eigen::Vector3d icp_gyro_residual(const KnotPair& knots, const GyroSample& sample,
                                  const IcpConfig& config) {
  const InterpolatedState s = interpolate_state(knots, sample.stamp);
  const Eigen::Matrix3d C_sv = config.T_vehicle_sensor.rotation().transpose();
  return sample.rate - config.gyro_bias - C_sv * angular(s.twist);
}

Eigen::Matrix<double, 3, 24> icp_gyro_jacobian(const KnotPair& knots, const GyroSample& sample,
                                               const IcpConfig& config) {
  const Window w = MakeWindow(knots, true);
  const LocalState st = Evaluate(w, sample.stamp, true);
  const StateJacobian d_twist = right_jacobian_times_derivative(st.xi, st.xi_dot) * st.d_xi +
                                right_jacobian(st.xi) * st.d_xi_dot;
  const Eigen::Matrix3d C_sv = config.T_vehicle_sensor.rotation().transpose();
  return -C_sv * d_twist.bottomRows<3>();
}

Eigen::Matrix<double, 12, 1> motion_prior_residual(const KnotPair& knots) {
  const Window w = MakeWindow(knots, false);
  Eigen::Matrix<double, 12, 1> e;
  e << w.xi21 - w.length * w.w1, w.gamma2 - w.w1;
  return e;
}

Eigen::Matrix<double, 12, 24> motion_prior_jacobian(const KnotPair& knots) {
  const Window w = MakeWindow(knots, true);
  Eigen::Matrix<double, 12, 24> J;
  J << w.d_xi21 - w.length * Select(kTwist1), w.d_gamma2 - Select(kTwist1);
  return J;
}

Matrix12d motion_prior_information(double dt, const Matrix6d& Qc) {
  const Matrix6d Qc_inv = Qc.inverse();
  Matrix12d info;
  info << 12.0 / (dt * dt * dt) * Qc_inv, -6.0 / (dt * dt) * Qc_inv, -6.0 / (dt * dt) * Qc_inv,
      4.0 / dt * Qc_inv;
  return info;
}

KnotPair perturb_knots(const KnotPair& knots, const Vector24d& delta) {
  KnotPair out = knots;
  for (int k = 0; k < 2; ++k) {
    out[k].pose = knots[k].pose * exp_map(delta.segment<6>(12 * k));
    out[k].twist = knots[k].twist + delta.segment<6>(12 * k + 6);
  }
  return out;
}

IcpResult icp_odometry_step(const LidarFrame& frame, const LocalMap& map,
                            std::span<const GyroSample> gyro, const KnotPair& knots,
                            const Matrix12d& prior_information, const IcpConfig& config) {
  if (map.empty()) throw InvalidArgumentError("icp needs a non-empty map");
  std::vector<std::size_t> order;
  const std::vector<TimeGroup> groups = GroupByStamp(frame, &order);
  if (!groups.empty() && (groups.front().stamp < knots[0].stamp - kStampSlack ||
                          groups.back().stamp > knots[1].stamp + kStampSlack)) {
    throw DomainError("frame timestamps fall outside the knot window");
  }

  IcpResult result;
  result.knots = knots;
  std::vector<double>& costs = result.cost_history;
  Matrix24d last_A = Matrix24d::Identity();
  // Iterate without the outlier gate until converged, then refine with it.
  bool gated = false;
  std::size_t stage_begin = 0;
  for (int it = 1; it <= config.max_iterations; ++it) {
    const Accumulator sys = BuildSystem(frame, order, groups, map, gyro, result.knots, knots,
                                        prior_information, config, gated);
    if (sys.matches < config.min_correspondences) {
      throw InsufficientDataError("icp found " + std::to_string(sys.matches) +
                                  " correspondences, needs " +
                                  std::to_string(config.min_correspondences));
    }
    Eigen::LLT<Matrix24d> llt(sys.A);
    if (llt.info() != Eigen::Success) {
      throw RankDeficiencyError("icp normal equations are not positive definite");
    }
    const Vector24d dx = llt.solve(sys.b);
    result.knots = perturb_knots(result.knots, dx);
    result.iterations = it;
    result.correspondences = sys.matches;
    result.cost = sys.cost;
    last_A = sys.A;
    costs.push_back(sys.cost);

    const double pose_step = std::hypot(dx.segment<6>(0).norm(), dx.segment<6>(12).norm());
    const double twist_step = std::hypot(dx.segment<6>(6).norm(), dx.segment<6>(18).norm());
    if (pose_step < config.pose_tolerance && twist_step < config.twist_tolerance) {
      if (gated || sys.beyond_gate == 0) {
        result.converged = true;
        break;
      }
      gated = true;
      stage_begin = costs.size();
      continue;
    }
    const std::size_t n = costs.size();
    if (n >= stage_begin + 4 && costs[n - 1] >= costs[n - 2] && costs[n - 2] >= costs[n - 3] &&
        costs[n - 3] >= costs[n - 4] &&
        costs[n - 1] - costs[n - 4] > config.divergence_rise * costs[n - 4]) {
      result.diverged = true;
      break;
    }
  }

  const Matrix24d cov = last_A.llt().solve(Matrix24d::Identity());
  const Matrix12d marginal = cov.bottomRightCorner<12, 12>().inverse();
  result.information = 0.5 * (marginal + marginal.transpose());
  result.delta = result.knots[0].pose.inverse() * result.knots[1].pose;
  return result;
}

LidarFrame undistort(const LidarFrame& frame, const KnotPair& knots, const Pose& T_vehicle_sensor) {
  const double t_ref = knots[1].stamp;
  const Pose T_ref_inv = (knots[1].pose * T_vehicle_sensor).inverse();
  LidarFrame out = frame;
  double cached_t = std::numeric_limits<double>::quiet_NaN();
  Pose correction;
  for (LidarPoint& p : out.points) {
    if (p.timestamp != cached_t) {
      cached_t = p.timestamp;
      correction = T_ref_inv * interpolate_state(knots, p.timestamp).pose * T_vehicle_sensor;
    }
    p.position = correction * p.position;
    if (p.normal) p.normal = correction.rotation() * *p.normal;
    p.timestamp = t_ref;
  }
  return out;
}

LidarFrame preprocess_icp_frame(const LidarFrame& frame, const IcpConfig& config) {
  return extract_planar_features(voxel_downsample(frame, config.voxel_size), config.k_neighbors,
                                 config.planarity_threshold);
}

IcpOdometry::IcpOdometry(IcpConfig config) : config_(std::move(config)) { config_.Validate(); }

IcpStep IcpOdometry::Process(const LidarFrame& frame, std::span<const GyroSample> gyro) {
  ValidateFrame(frame);
  const LidarFrame features = preprocess_icp_frame(frame, config_);
  IcpStep step;
  if (frames_ == 0) {
    knot_ = TrajectoryKnot{Pose::Identity(), Twist::Zero(), frame.t_end};
    information_ = config_.initial_covariance.inverse();
    first_features_ = features;
    step.undistorted = features;
    for (LidarPoint& p : step.undistorted.points) p.timestamp = frame.t_end;
    step.result.knots = {knot_, knot_};
    step.result.converged = true;
  } else {
    const double dt = frame.t_end - knot_.stamp;
    const KnotPair guess{knot_, TrajectoryKnot{knot_.pose * exp_map(dt * knot_.twist),
                                               knot_.twist, frame.t_end}};
    step.result = icp_odometry_step(features, map_, gyro, guess, information_, config_);
    if (frames_ == 1) {
      // The registered twist over-corrects for the smear of the map it was
      // registered against, so each pass averages it with the twist used.
      const double period = first_features_.t_end - first_features_.t_start;
      Twist used = Twist::Zero();
      for (int pass = 0; pass < kBootstrapPasses; ++pass) {
        const Twist next = 0.5 * (used + step.result.knots[0].twist);
        if ((next - used).norm() < kBootstrapTolerance) break;
        used = next;
        const KnotPair first{
            TrajectoryKnot{exp_map(-period * used), used, first_features_.t_start},
            TrajectoryKnot{Pose::Identity(), used, first_features_.t_end}};
        step.refined_first = undistort(first_features_, first, config_.T_vehicle_sensor);
        map_ = LocalMap();
        map_.Insert(*step.refined_first, config_.T_vehicle_sensor, config_.map_span);
        step.result = icp_odometry_step(features, map_, gyro, guess, information_, config_);
      }
      first_features_ = LidarFrame{};
    }
    step.delta = step.result.delta;
    step.undistorted = undistort(features, step.result.knots, config_.T_vehicle_sensor);
    knot_ = step.result.knots[1];
    information_ = step.result.information;
  }
  map_.Insert(step.undistorted, knot_.pose * config_.T_vehicle_sensor, config_.map_span);
  step.knot = knot_;
  ++frames_;
  return step;
}

}  // namespace lidarloc
