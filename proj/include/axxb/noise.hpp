#pragma once

// Decoupled pose noise model, Gaussian sampling and the generic
// forward/backward covariance propagation rules.

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "axxb/errors.hpp"
#include "axxb/liegroup.hpp"

namespace axxb {

struct DecoupledPose {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();
};

inline DecoupledPose compose(const DecoupledPose& a, const DecoupledPose& b) {
  return {a.R * b.R, a.R * b.t + a.t};
}

inline DecoupledPose inverse(const DecoupledPose& p) {
  return {p.R.transpose(), -(p.R.transpose() * p.t)};
}

// A pose with independent rotation / translation uncertainty. cov_R lives in
// the Lie algebra (left perturbation), cov_t in plain Euclidean coordinates.
struct NoisyPose {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();
  Mat3 cov_R = Mat3::Zero();
  Mat3 cov_t = Mat3::Zero();

  DecoupledPose mean() const { return {R, t}; }
};

struct MeasurementPair {
  NoisyPose A;
  NoisyPose B;
};

using MeasurementSet = std::vector<MeasurementPair>;

inline void validate_cov(const Mat3& c) {
  if ((c - c.transpose()).norm() > 1e-12)
    throw NonPsdError("covariance is not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat3> eig(c);
  if (eig.eigenvalues().minCoeff() < -1e-12)
    throw NonPsdError("covariance has a negative eigenvalue");
}

// Counter-based deterministic generator (splitmix64 stream) with a
// Box-Muller normal sampler. Identical output for identical seeds,
// independent of platform or call interleaving elsewhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform on (0, 1]
  double uniform01() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

  Vec3 normal3() { return Vec3(normal(), normal(), normal()); }

  Vec3 unit_vector() {
    // Marsaglia-free: normalize a Gaussian triple
    Vec3 v = normal3();
    while (v.norm() < 1e-12) v = normal3();
    return v.normalized();
  }

 private:
  std::uint64_t state_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

// Cholesky factor of a PSD matrix; rank deficiency is absorbed by a 1e-15
// diagonal jitter so exactly-zero noise axes are legal.
inline Mat3 cholesky_psd(const Mat3& c) {
  validate_cov(c);
  if (c.isZero(0.0)) return Mat3::Zero();
  Eigen::LLT<Mat3> llt(c);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  llt.compute(c + 1e-15 * Mat3::Identity());
  if (llt.info() != Eigen::Success)
    throw NonPsdError("covariance admits no Cholesky factor");
  return llt.matrixL();
}

inline DecoupledPose sample_noisy_pose(const DecoupledPose& mean,
                                       const Mat3& cov_rot,
                                       const Mat3& cov_trans, Rng& rng) {
  const Mat3 l_rot = cholesky_psd(cov_rot);
  const Mat3 l_trans = cholesky_psd(cov_trans);
  const Vec3 xi_r = l_rot * rng.normal3();
  const Vec3 xi_t = l_trans * rng.normal3();
  return {exp_so3(xi_r) * mean.R, mean.t + xi_t};
}

inline DecoupledPose sample_noisy_pose(const DecoupledPose& mean,
                                       const Mat3& cov_rot,
                                       const Mat3& cov_trans,
                                       std::uint64_t rng_seed) {
  Rng rng(rng_seed);
  return sample_noisy_pose(mean, cov_rot, cov_trans, rng);
}

inline DecoupledPose sample_pose(const NoisyPose& p, Rng& rng) {
  return sample_noisy_pose(p.mean(), p.cov_R, p.cov_t, rng);
}

// Sigma_f = J Sigma J^T
inline Eigen::MatrixXd forward_propagate(const Eigen::MatrixXd& cov,
                                         const Eigen::MatrixXd& jac) {
  if (cov.rows() != cov.cols() || jac.cols() != cov.rows())
    throw DimensionMismatchError("forward_propagate: non-conforming shapes");
  Eigen::MatrixXd out = jac * cov * jac.transpose();
  return 0.5 * (out + out.transpose());
}

// Sigma* = (J^T Sigma_V^-1 J)^-1
inline Eigen::MatrixXd backward_propagate(const Eigen::MatrixXd& jac,
                                          const Eigen::MatrixXd& cov_v_inv) {
  if (cov_v_inv.rows() != cov_v_inv.cols() || jac.rows() != cov_v_inv.rows())
    throw DimensionMismatchError("backward_propagate: non-conforming shapes");
  Eigen::MatrixXd normal = jac.transpose() * cov_v_inv * jac;
  normal = 0.5 * (normal + normal.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(normal);
  const double lmax = eig.eigenvalues().maxCoeff();
  const double lmin = eig.eigenvalues().minCoeff();
  if (!(lmin > 0.0) || lmax / lmin > 1e12)
    throw RankDeficientError("backward_propagate: normal matrix ill-conditioned");
  Eigen::MatrixXd out = normal.inverse();
  return 0.5 * (out + out.transpose());
}

// Transports rotation-matrix noise into rotation-vector coordinates:
// Sigma_alpha = J(v)^-1 Sigma_R J(v)^-T
inline Mat3 rotvec_covariance(const Vec3& rotvec, const Mat3& cov_R) {
  const Mat3 jinv = left_jacobian_inv(rotvec);
  Mat3 out = jinv * cov_R * jinv.transpose();
  return 0.5 * (out + out.transpose());
}

inline Mat3 symmetrize(const Mat3& m) { return 0.5 * (m + m.transpose()); }

}  // namespace axxb
