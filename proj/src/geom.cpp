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

#include "lidarloc/geom.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <cmath>
#include <numbers>
#include <vector>

#include "lidarloc/error.hpp"

namespace lidarloc {

namespace {

constexpr double kSmallAngle = 1e-7;
// Below this angle the Jacobian coefficients switch to their Taylor expansions.
constexpr double kTaylorAngle = 1e-2;
constexpr double kLogDomainMargin = 1e-6;
constexpr double kDeterminantTolerance = 1e-9;

constexpr int kFactorialTerms = 30;
constexpr int kBernoulliTerms = 40;

Eigen::Matrix3d Orthonormalize(const Eigen::Matrix3d& C) {
  return Eigen::Quaterniond(C).normalized().toRotationMatrix();
}

// c_n = 1 / (n + 1)!
const std::vector<double>& FactorialCoefficients() {
  static const std::vector<double> coeffs = [] {
    std::vector<double> c(kFactorialTerms);
    double f = 1.0;
    for (int n = 0; n < kFactorialTerms; ++n) {
      f *= static_cast<double>(n + 1);
      c[n] = 1.0 / f;
    }
    return c;
  }();
  return coeffs;
}

// c_n = B_n / n!, with B_1 = -1/2. Even terms from
// B_2k / (2k)! = (-1)^(k+1) 2 zeta(2k) / (2 pi)^(2k).
const std::vector<double>& BernoulliCoefficients() {
  static const std::vector<double> coeffs = [] {
    std::vector<double> c(kBernoulliTerms, 0.0);
    c[0] = 1.0;
    c[1] = -0.5;
    const double two_pi = 2.0 * std::numbers::pi;
    c[2] = 1.0 / 12.0;
    c[4] = -1.0 / 720.0;
    c[6] = 1.0 / 30240.0;
    for (int n = 8; n < kBernoulliTerms; n += 2) {
      const int k = n / 2;
      double zeta = 0.0;
      for (int j = 2000; j >= 1; --j) zeta += std::pow(static_cast<double>(j), -n);
      const double sign = (k % 2 == 1) ? 1.0 : -1.0;
      c[n] = sign * 2.0 * zeta / std::pow(two_pi, n);
    }
    return c;
  }();
  return coeffs;
}

// sum_n c_n (-A)^n, evaluated by Horner's rule.
Matrix6d SignedPowerSeries(const std::vector<double>& c, const Matrix6d& A) {
  Matrix6d result = c.back() * Matrix6d::Identity();
  for (int n = static_cast<int>(c.size()) - 2; n >= 0; --n) {
    result = c[n] * Matrix6d::Identity() - A * result;
  }
  return result;
}

// d/dxi [ sum_n c_n (-A)^n v ] with A = curlyhat(xi). Uses
// d(A^n v)/dxi = -sum_{k<n} A^k curlyhat(A^(n-1-k) v), regrouped by powers of A.
Matrix6d SignedPowerSeriesDerivative(const std::vector<double>& c, const Vector6d& xi,
                                     const Vector6d& v) {
  const int N = static_cast<int>(c.size());
  const Matrix6d A = curlyhat(xi);
  std::vector<Matrix6d> W(N);
  Vector6d w = v;
  for (int j = 0; j < N; ++j) {
    W[j] = curlyhat(w);
    w = A * w;
  }
  // coefficient of the whole derivative for term n: c_n (-1)^n (-1) = -c_n (-1)^n
  std::vector<double> s(N);
  for (int n = 0; n < N; ++n) s[n] = -c[n] * ((n % 2 == 0) ? 1.0 : -1.0);
  // G_k = sum_j s_{j+k+1} W_j ; result = sum_k A^k G_k
  Matrix6d result = Matrix6d::Zero();
  for (int k = N - 2; k >= 0; --k) {
    Matrix6d G = Matrix6d::Zero();
    for (int j = 0; j + k + 1 < N; ++j) G += s[j + k + 1] * W[j];
    result = G + A * result;
  }
  return result;
}

Eigen::Matrix3d SE3Q(const Vector6d& xi) {
  const Eigen::Vector3d rho = xi.head<3>();
  const Eigen::Vector3d phi = xi.tail<3>();
  const double a = phi.norm();
  const double a2 = a * a;
  double m2, m3, m4;
  if (a < kTaylorAngle) {
    const double a4 = a2 * a2;
    m2 = 1.0 / 6.0 - a2 / 120.0 + a4 / 5040.0;
    m3 = -1.0 / 24.0 + a2 / 720.0 - a4 / 40320.0;
    const double c4 = -1.0 / 120.0 + a2 / 5040.0 - a4 / 362880.0;
    m4 = 0.5 * (m3 - 3.0 * c4);
  } else {
    const double s = std::sin(a);
    const double c = std::cos(a);
    const double a3 = a2 * a;
    m2 = (a - s) / a3;
    m3 = (1.0 - 0.5 * a2 - c) / (a2 * a2);
    m4 = 0.5 * (m3 - 3.0 * (a - s - a3 / 6.0) / (a3 * a2));
  }
  const Eigen::Matrix3d px = hat(phi);
  const Eigen::Matrix3d rx = hat(rho);
  const Eigen::Matrix3d pxrx = px * rx;
  const Eigen::Matrix3d rxpx = rx * px;
  const Eigen::Matrix3d pxrxpx = pxrx * px;
  return 0.5 * rx + m2 * (pxrx + rxpx + pxrxpx) -
         m3 * (px * pxrx + rxpx * px - 3.0 * pxrxpx) -
         m4 * (pxrxpx * px + px * pxrxpx);
}

}  // namespace

Pose::Pose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
    : rotation_(rotation), translation_(translation) {
  if (std::abs(rotation_.determinant() - 1.0) > kDeterminantTolerance) {
    rotation_ = Orthonormalize(rotation_);
  }
}

Pose Pose::FromMatrix(const Eigen::Matrix4d& T) {
  return Pose(T.topLeftCorner<3, 3>(), T.topRightCorner<3, 1>());
}

Pose Pose::FromRowMajor(std::span<const double, 12> v) {
  Eigen::Matrix3d R;
  Eigen::Vector3d t;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) R(r, c) = v[4 * r + c];
    t(r) = v[4 * r + 3];
  }
  return Pose(R, t);
}

Eigen::Matrix4d Pose::matrix() const {
  Eigen::Matrix4d T = Eigen::Matrix4d::Identity();
  T.topLeftCorner<3, 3>() = rotation_;
  T.topRightCorner<3, 1>() = translation_;
  return T;
}

std::array<double, 12> Pose::ToRowMajor() const {
  std::array<double, 12> v{};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) v[4 * r + c] = rotation_(r, c);
    v[4 * r + 3] = translation_(r);
  }
  return v;
}

Pose Pose::inverse() const {
  Pose out;
  out.rotation_ = rotation_.transpose();
  out.translation_ = -(out.rotation_ * translation_);
  return out;
}

Pose Pose::operator*(const Pose& other) const {
  return Pose(rotation_ * other.rotation_, rotation_ * other.translation_ + translation_);
}

Eigen::Matrix3d hat(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  // clang-format off
  m <<   0.0, -v.z(),  v.y(),
       v.z(),    0.0, -v.x(),
      -v.y(),  v.x(),    0.0;
  // clang-format on
  return m;
}

Eigen::Matrix4d hat(const Vector6d& xi) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
  m.topLeftCorner<3, 3>() = hat(Eigen::Vector3d(xi.tail<3>()));
  m.topRightCorner<3, 1>() = xi.head<3>();
  return m;
}

Matrix6d curlyhat(const Vector6d& xi) {
  Matrix6d m = Matrix6d::Zero();
  const Eigen::Matrix3d phi_x = hat(Eigen::Vector3d(xi.tail<3>()));
  m.topLeftCorner<3, 3>() = phi_x;
  m.bottomRightCorner<3, 3>() = phi_x;
  m.topRightCorner<3, 3>() = hat(Eigen::Vector3d(xi.head<3>()));
  return m;
}

Eigen::Matrix<double, 3, 6> odot(const Eigen::Vector3d& p) {
  Eigen::Matrix<double, 3, 6> m;
  m.leftCols<3>().setIdentity();
  m.rightCols<3>() = -hat(p);
  return m;
}

Eigen::Matrix3d so3_exp(const Eigen::Vector3d& phi) {
  const double a = phi.norm();
  const Eigen::Matrix3d px = hat(phi);
  if (a < kSmallAngle) {
    return Orthonormalize(Eigen::Matrix3d::Identity() + px + 0.5 * px * px);
  }
  const double a2 = a * a;
  return Eigen::Matrix3d::Identity() + (std::sin(a) / a) * px +
         ((1.0 - std::cos(a)) / a2) * px * px;
}

Eigen::Vector3d so3_log(const Eigen::Matrix3d& C) {
  const Eigen::Vector3d v(0.5 * (C(2, 1) - C(1, 2)), 0.5 * (C(0, 2) - C(2, 0)),
                          0.5 * (C(1, 0) - C(0, 1)));
  const double s = v.norm();
  const double c = 0.5 * (C.trace() - 1.0);
  const double angle = std::atan2(s, c);
  if (angle >= std::numbers::pi - kLogDomainMargin) {
    throw DomainError("so3_log: rotation angle too close to pi for a stable logarithm");
  }
  if (angle < kSmallAngle) return v * (1.0 + angle * angle / 6.0);
  return v * (angle / s);
}

Eigen::Matrix3d so3_left_jacobian(const Eigen::Vector3d& phi) {
  const double a = phi.norm();
  const double a2 = a * a;
  double c1, c2;
  if (a < kTaylorAngle) {
    c1 = 0.5 - a2 / 24.0 + a2 * a2 / 720.0;
    c2 = 1.0 / 6.0 - a2 / 120.0 + a2 * a2 / 5040.0;
  } else {
    c1 = (1.0 - std::cos(a)) / a2;
    c2 = (a - std::sin(a)) / (a2 * a);
  }
  const Eigen::Matrix3d px = hat(phi);
  return Eigen::Matrix3d::Identity() + c1 * px + c2 * px * px;
}

Eigen::Matrix3d so3_left_jacobian_inverse(const Eigen::Vector3d& phi) {
  const double a = phi.norm();
  const double a2 = a * a;
  double c;
  if (a < kTaylorAngle) {
    c = 1.0 / 12.0 + a2 / 720.0 + a2 * a2 / 30240.0;
  } else {
    const double half = 0.5 * a;
    c = (1.0 - half * std::cos(half) / std::sin(half)) / a2;
  }
  const Eigen::Matrix3d px = hat(phi);
  return Eigen::Matrix3d::Identity() - 0.5 * px + c * px * px;
}

Pose exp_map(const Vector6d& xi) {
  const Eigen::Vector3d phi = xi.tail<3>();
  return Pose(so3_exp(phi), so3_left_jacobian(phi) * xi.head<3>());
}

Vector6d log_map(const Pose& pose) {
  const Eigen::Vector3d phi = so3_log(pose.rotation());
  Vector6d xi;
  xi << so3_left_jacobian_inverse(phi) * pose.translation(), phi;
  return xi;
}

AdjointMap adjoint(const Pose& pose) {
  AdjointMap ad = AdjointMap::Zero();
  const Eigen::Matrix3d& C = pose.rotation();
  ad.topLeftCorner<3, 3>() = C;
  ad.bottomRightCorner<3, 3>() = C;
  ad.topRightCorner<3, 3>() = hat(pose.translation()) * C;
  return ad;
}

Matrix6d left_jacobian(const Vector6d& xi) {
  Matrix6d J = Matrix6d::Zero();
  const Eigen::Matrix3d Jso3 = so3_left_jacobian(xi.tail<3>());
  J.topLeftCorner<3, 3>() = Jso3;
  J.bottomRightCorner<3, 3>() = Jso3;
  J.topRightCorner<3, 3>() = SE3Q(xi);
  return J;
}

Matrix6d left_jacobian_inverse(const Vector6d& xi) {
  Matrix6d J = Matrix6d::Zero();
  const Eigen::Matrix3d Jinv = so3_left_jacobian_inverse(xi.tail<3>());
  J.topLeftCorner<3, 3>() = Jinv;
  J.bottomRightCorner<3, 3>() = Jinv;
  J.topRightCorner<3, 3>() = -Jinv * SE3Q(xi) * Jinv;
  return J;
}

Matrix6d right_jacobian(const Vector6d& xi) { return left_jacobian(-xi); }

Matrix6d right_jacobian_inverse(const Vector6d& xi) { return left_jacobian_inverse(-xi); }

Matrix6d right_jacobian_series(const Vector6d& xi) {
  return SignedPowerSeries(FactorialCoefficients(), curlyhat(xi));
}

Matrix6d right_jacobian_inverse_series(const Vector6d& xi) {
  return SignedPowerSeries(BernoulliCoefficients(), curlyhat(xi));
}

Matrix6d right_jacobian_times_derivative(const Vector6d& xi, const Vector6d& v) {
  return SignedPowerSeriesDerivative(FactorialCoefficients(), xi, v);
}

Matrix6d right_jacobian_inverse_times_derivative(const Vector6d& xi, const Vector6d& v) {
  return SignedPowerSeriesDerivative(BernoulliCoefficients(), xi, v);
}

}  // namespace lidarloc
