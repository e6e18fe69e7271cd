#pragma once

// SO(3) primitives: hat/vee maps, exponential/logarithm and the left
// Jacobian with its inverse. All functions are pure and thread-safe.

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "axxb/errors.hpp"

namespace axxb {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

inline constexpr double kSmallAngle = 1e-8;

inline Mat3 hat(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return s;
}

inline Vec3 vee(const Mat3& s) {
  if ((s + s.transpose()).norm() > 1e-9)
    throw NonSkewError("vee: matrix is not skew-symmetric");
  return Vec3(s(2, 1), s(0, 2), s(1, 0));
}

// Rodrigues formula, with a 4th-order Taylor branch below kSmallAngle.
inline Mat3 exp_so3(const Vec3& v) {
  const double theta2 = v.squaredNorm();
  const double theta = std::sqrt(theta2);
  double a, b;  // sin(t)/t, (1-cos(t))/t^2
  if (theta < kSmallAngle) {
    a = 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0;
    b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  const Mat3 s = hat(v);
  return Mat3::Identity() + a * s + b * s * s;
}

inline bool is_rotation(const Mat3& r, double tol = 1e-9) {
  return (r.transpose() * r - Mat3::Identity()).norm() <= tol &&
         std::abs(r.determinant() - 1.0) <= tol;
}

// Nearest rotation in the Frobenius sense (polar projection).
inline Mat3 project_to_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Mat3 d = Mat3::Identity();
    d(2, 2) = -1.0;
    r = svd.matrixU() * d * svd.matrixV().transpose();
  }
  return r;
}

// Enforces the rotation invariants, repairing drift up to 1e-6 by polar
// projection; larger violations are rejected.
inline Mat3 validate_rotation(const Mat3& r) {
  const double err = (r.transpose() * r - Mat3::Identity()).norm();
  if (err <= 1e-9 && std::abs(r.determinant() - 1.0) <= 1e-9) return r;
  if (err <= 1e-6 && r.determinant() > 0.0) return project_to_rotation(r);
  throw InvalidRotationError("matrix is not a rotation (orthonormality error " +
                             std::to_string(err) + ")");
}

// Logarithm with canonical representative ||v|| <= pi. The near-pi branch
// extracts the axis from the symmetric part, which stays well-conditioned
// where the antisymmetric part vanishes.
inline Vec3 log_so3(const Mat3& r_in) {
  const Mat3 r = validate_rotation(r_in);
  const double cos_theta =
      std::clamp((r.trace() - 1.0) * 0.5, -1.0, 1.0);
  const Vec3 w(0.5 * (r(2, 1) - r(1, 2)), 0.5 * (r(0, 2) - r(2, 0)),
               0.5 * (r(1, 0) - r(0, 1)));  // = sin(theta) * axis

  if (cos_theta > -0.999) {
    const double theta = std::acos(cos_theta);
    if (theta < kSmallAngle) {
      const double t2 = theta * theta;
      // theta/sin(theta) expansion
      return (1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0) * w;
    }
    return (theta / std::sin(theta)) * w;
  }

  // Near pi: axis^2 from (R + R^T)/2 = I + (1-cos)(nn^T - I).
  const Mat3 sym = 0.5 * (r + r.transpose());
  const Mat3 nnt =
      Mat3::Identity() + (sym - Mat3::Identity()) / (1.0 - cos_theta);
  int k = 0;
  nnt.diagonal().maxCoeff(&k);
  Vec3 n = nnt.col(k) / std::sqrt(std::max(nnt(k, k), 1e-300));
  n.normalize();

  const double sin_theta = w.norm();
  const double theta = std::numbers::pi - std::asin(std::clamp(sin_theta, 0.0, 1.0));
  if (sin_theta > 1e-12) {
    if (n.dot(w) < 0.0) n = -n;
  } else if (n(k) < 0.0) {
    n = -n;  // exactly pi: both signs valid, fix the dominant component
  }
  return theta * n;
}

// J(v) = I + (1-cos t)/t^2 [v] + (t - sin t)/t^3 [v]^2
inline Mat3 left_jacobian(const Vec3& v) {
  const double theta2 = v.squaredNorm();
  const double theta = std::sqrt(theta2);
  double b, c;
  if (theta < kSmallAngle) {
    b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0;
    c = 1.0 / 6.0 - theta2 / 120.0 + theta2 * theta2 / 5040.0;
  } else {
    b = (1.0 - std::cos(theta)) / theta2;
    c = (theta - std::sin(theta)) / (theta2 * theta);
  }
  const Mat3 s = hat(v);
  return Mat3::Identity() + b * s + c * s * s;
}

// Closed-form inverse, valid for ||v|| < 2*pi.
inline Mat3 left_jacobian_inv(const Vec3& v) {
  const double theta2 = v.squaredNorm();
  const double theta = std::sqrt(theta2);
  if (theta >= 2.0 * std::numbers::pi - 1e-6)
    throw NearSingularError("left_jacobian_inv: rotation vector norm near 2*pi");
  double c;
  if (theta < kSmallAngle) {
    c = 1.0 / 12.0 + theta2 / 720.0 + theta2 * theta2 / 30240.0;
  } else {
    // 1/t^2 - cot(t/2)/(2t), finite on (0, 2*pi)
    c = 1.0 / theta2 -
        std::cos(0.5 * theta) / (2.0 * theta * std::sin(0.5 * theta));
  }
  const Mat3 s = hat(v);
  return Mat3::Identity() - 0.5 * s + c * s * s;
}

// Test utility for the identity R [v] R^T = [R v].
inline bool conjugate_identity_check(const Mat3& r, const Vec3& v) {
  return (r * hat(v) * r.transpose() - hat(r * v)).norm() <= 1e-10;
}

}  // namespace axxb
