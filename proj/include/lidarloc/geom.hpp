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
#include <span>

namespace lidarloc {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

/// Body velocity in the vehicle frame, linear part first:
/// (v_x forward, v_y left, v_z up, w_roll, w_pitch, w_yaw).
using Twist = Vector6d;

/// Adjoint of an SE(3) element; maps twists between frames.
using AdjointMap = Matrix6d;

namespace twist_index {
inline constexpr int kVx = 0;
inline constexpr int kVy = 1;
inline constexpr int kVz = 2;
inline constexpr int kWx = 3;
inline constexpr int kWy = 4;
inline constexpr int kWz = 5;
}  // namespace twist_index

inline Eigen::Vector3d linear(const Twist& w) { return w.head<3>(); }
inline Eigen::Vector3d angular(const Twist& w) { return w.tail<3>(); }
inline Twist make_twist(const Eigen::Vector3d& v, const Eigen::Vector3d& omega) {
  Twist w;
  w << v, omega;
  return w;
}

/// Rigid transform. Applied to a point p as R p + t.
class Pose {
 public:
  Pose() : rotation_(Eigen::Matrix3d::Identity()), translation_(Eigen::Vector3d::Zero()) {}
  Pose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation);

  static Pose Identity() { return Pose(); }
  static Pose FromMatrix(const Eigen::Matrix4d& T);
  static Pose FromTranslation(const Eigen::Vector3d& t) {
    return Pose(Eigen::Matrix3d::Identity(), t);
  }
  /// Row-major upper 3x4 block.
  static Pose FromRowMajor(std::span<const double, 12> values);

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }
  Eigen::Matrix4d matrix() const;
  std::array<double, 12> ToRowMajor() const;

  Pose inverse() const;
  Pose operator*(const Pose& other) const;
  Eigen::Vector3d operator*(const Eigen::Vector3d& point) const {
    return rotation_ * point + translation_;
  }

 private:
  Eigen::Matrix3d rotation_;
  Eigen::Vector3d translation_;
};

Eigen::Matrix3d hat(const Eigen::Vector3d& v);
/// 4x4 Lie-algebra element of a twist.
Eigen::Matrix4d hat(const Vector6d& xi);
/// Adjoint-action operator on se(3): curlyhat(a) b = ad_a b.
Matrix6d curlyhat(const Vector6d& xi);
/// p^odot such that hat(xi) * [p;1] = odot(p) * xi.
Eigen::Matrix<double, 3, 6> odot(const Eigen::Vector3d& p);

Eigen::Matrix3d so3_exp(const Eigen::Vector3d& phi);
/// Throws DomainError when the rotation angle is at or above pi - 1e-6.
Eigen::Vector3d so3_log(const Eigen::Matrix3d& C);
Eigen::Matrix3d so3_left_jacobian(const Eigen::Vector3d& phi);
Eigen::Matrix3d so3_left_jacobian_inverse(const Eigen::Vector3d& phi);

Pose exp_map(const Vector6d& xi);
/// Inverse of exp_map for rotation angles strictly below pi.
Vector6d log_map(const Pose& pose);
AdjointMap adjoint(const Pose& pose);

// SE(3) Jacobians. Left: exp(xi + d) ~ exp(J_l d) exp(xi).
// Right: exp(xi + d) ~ exp(xi) exp(J_r d).
Matrix6d left_jacobian(const Vector6d& xi);
Matrix6d left_jacobian_inverse(const Vector6d& xi);
Matrix6d right_jacobian(const Vector6d& xi);
Matrix6d right_jacobian_inverse(const Vector6d& xi);

/// d(J_r(xi) v)/d(xi), evaluated by differentiating the power series term-wise.
Matrix6d right_jacobian_times_derivative(const Vector6d& xi, const Vector6d& v);
/// d(J_r^{-1}(xi) v)/d(xi), same approach via the Bernoulli series.
Matrix6d right_jacobian_inverse_times_derivative(const Vector6d& xi, const Vector6d& v);

/// Power-series evaluation of the right Jacobian and its inverse. Slower than
/// the closed forms; exposed for cross-checking and small angles.
Matrix6d right_jacobian_series(const Vector6d& xi);
Matrix6d right_jacobian_inverse_series(const Vector6d& xi);

}  // namespace lidarloc
