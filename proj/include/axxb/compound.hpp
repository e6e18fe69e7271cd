#pragma once

// Covariance propagation through pose composition with decoupled
// rotation/translation uncertainty, including the fourth-order bracket
// correction for the rotation block.

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "axxb/errors.hpp"
#include "axxb/liegroup.hpp"
#include "axxb/noise.hpp"

namespace axxb {

// <<M>> := -tr(M) I + M
inline Mat3 bracket1(const Mat3& m) {
  return -m.trace() * Mat3::Identity() + m;
}

// <<M, N>> := <<M>><<N>> + <<N M>>
inline Mat3 bracket2(const Mat3& m, const Mat3& n) {
  return bracket1(m) * bracket1(n) + bracket1(n * m);
}

namespace detail {

// The bracket terms are not guaranteed PSD; clip eigenvalues in [-1e-12, 0)
// to zero, reject anything more negative.
inline Mat3 clip_to_psd(const Mat3& m) {
  Eigen::SelfAdjointEigenSolver<Mat3> eig(symmetrize(m));
  Vec3 vals = eig.eigenvalues();
  if (vals.minCoeff() < -1e-12)
    throw NonPsdError("compound_poses: propagated covariance is indefinite");
  for (int i = 0; i < 3; ++i) vals(i) = std::max(vals(i), 0.0);
  return symmetrize(eig.eigenvectors() * vals.asDiagonal() *
                    eig.eigenvectors().transpose());
}

}  // namespace detail

inline NoisyPose compound_poses(const NoisyPose& p1, const NoisyPose& p2) {
  NoisyPose out;
  out.R = p1.R * p2.R;
  out.t = p1.R * p2.t + p1.t;

  const Mat3 sigma_r2p = symmetrize(p1.R * p2.cov_R * p1.R.transpose());
  const Mat3 a1 = bracket1(p1.cov_R);
  const Mat3 a2 = bracket1(sigma_r2p);
  const Mat3 b = bracket2(p1.cov_R, sigma_r2p);
  Mat3 cov_r = p1.cov_R + sigma_r2p +
               (a1 * sigma_r2p + sigma_r2p * a1.transpose() +
                p1.cov_R * a2 + p1.cov_R * a2.transpose()) /
                   12.0 +
               b / 4.0;
  out.cov_R = detail::clip_to_psd(cov_r);

  const Mat3 s = hat(p1.R * p2.t);
  out.cov_t = detail::clip_to_psd(p1.cov_t +
                                  p1.R * p2.cov_t * p1.R.transpose() +
                                  s * p1.cov_R * s.transpose());
  return out;
}

// Left fold of compound_poses over the chain.
inline NoisyPose propagate_chain(std::span<const NoisyPose> poses) {
  if (poses.empty())
    throw DimensionMismatchError("propagate_chain: empty pose chain");
  NoisyPose acc = poses.front();
  for (std::size_t i = 1; i < poses.size(); ++i)
    acc = compound_poses(acc, poses[i]);
  return acc;
}

}  // namespace axxb
