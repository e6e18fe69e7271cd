#pragma once

// Iterative covariance-weighted estimation of the translation part of X.
// Consumes the rotation solution: R* rotates q_i = R* t_B_i - t_A_i and its
// covariance feeds the q_i weights.

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <vector>

#include "axxb/errors.hpp"
#include "axxb/liegroup.hpp"
#include "axxb/noise.hpp"
#include "axxb/rotsolve.hpp"

namespace axxb {

struct TransMeasurement {
  Mat3 R_A;
  Vec3 q;       // R* t_B - t_A
  Mat3 cov_RA;  // left-perturbation covariance of R_A
  Mat3 cov_q;
};

struct TransSolution {
  Vec3 translation = Vec3::Zero();
  Mat3 cov_trans = Mat3::Zero();
  std::vector<Mat3> refined_RAs;
  int iterations = 0;
  double final_update_norm = 0.0;
};

// Forward-propagates all three noise sources into the covariance of q:
// Sigma_q = Sigma_tA + R* Sigma_tB R*^T + [R* t_B] Sigma_R [R* t_B]^T.
inline TransMeasurement build_q(const Mat3& R_star, const Mat3& cov_R_star,
                                const NoisyPose& A, const NoisyPose& B) {
  TransMeasurement m;
  m.R_A = A.R;
  m.cov_RA = A.cov_R;
  m.q = R_star * B.t - A.t;
  const Mat3 s = hat(R_star * B.t);
  m.cov_q = symmetrize(A.cov_t + R_star * B.cov_t * R_star.transpose() +
                       s * cov_R_star * s.transpose());
  return m;
}

struct TransJacobianBlocks {
  Mat63 j_t;   // w.r.t. the translation update delta_t
  Mat63 j_xi;  // w.r.t. the R_A refinement xi_{R_A,i}
};

// J_i^t = [0; R_A_i - I],  J_i^{xi_RA} = [I; -[R_A_i t_hat]].
inline std::vector<TransJacobianBlocks> build_translation_jacobian(
    const Vec3& t_hat, std::span<const Mat3> RA_hats) {
  std::vector<TransJacobianBlocks> blocks(RA_hats.size());
  for (std::size_t i = 0; i < RA_hats.size(); ++i) {
    blocks[i].j_t.topRows<3>().setZero();
    blocks[i].j_t.bottomRows<3>() = RA_hats[i] - Mat3::Identity();
    blocks[i].j_xi.topRows<3>() = Mat3::Identity();
    blocks[i].j_xi.bottomRows<3>() = -hat(RA_hats[i] * t_hat);
  }
  return blocks;
}

namespace detail {

struct TransState {
  Vec3 t_hat;
  std::vector<Mat3> RA_hat;
};

inline std::vector<Vec6> trans_residuals(
    const TransState& st, std::span<const TransMeasurement> meas) {
  std::vector<Vec6> r(meas.size());
  for (std::size_t i = 0; i < meas.size(); ++i) {
    r[i].head<3>() = log_so3(meas[i].R_A * st.RA_hat[i].transpose());
    r[i].tail<3>() = meas[i].q - (st.RA_hat[i] - Mat3::Identity()) * st.t_hat;
  }
  return r;
}

// Unweighted least-squares solution of (R_A_i - I) t = q_i.
inline Vec3 initial_translation(std::span<const TransMeasurement> meas) {
  Mat3 normal = Mat3::Zero();
  Vec3 rhs = Vec3::Zero();
  for (const TransMeasurement& m : meas) {
    const Mat3 a = m.R_A - Mat3::Identity();
    normal += a.transpose() * a;
    rhs += a.transpose() * m.q;
  }
  if (condition_number(normal) > 1e12)
    throw RankDeficientError(
        "solve_translation: insufficient rotation diversity in the A poses");
  return normal.ldlt().solve(rhs);
}

}  // namespace detail

inline TransSolution solve_translation(
    std::span<const TransMeasurement> measurements,
    std::optional<Vec3> init = std::nullopt) {
  if (measurements.size() < 2)
    throw DegenerateMotionError(
        "solve_translation: at least 2 measurements required");
  constexpr int kMaxIterations = 100;
  constexpr double kTol = 1e-12;
  const std::size_t k = measurements.size();

  detail::TransState st;
  st.t_hat = init ? *init : detail::initial_translation(measurements);
  st.RA_hat.resize(k);
  std::vector<Mat63> jp(k), jn(k);
  std::vector<Mat6> winv(k);
  for (std::size_t i = 0; i < k; ++i) {
    st.RA_hat[i] = validate_rotation(measurements[i].R_A);
    winv[i].setZero();
    winv[i].topLeftCorner<3, 3>() =
        detail::invert_weight(measurements[i].cov_RA);
    winv[i].bottomRightCorner<3, 3>() =
        detail::invert_weight(measurements[i].cov_q);
  }

  TransSolution sol;
  bool converged = false;
  for (int iter = 0; iter < kMaxIterations && !converged; ++iter) {
    const auto jac = build_translation_jacobian(st.t_hat, st.RA_hat);
    const auto res = detail::trans_residuals(st, measurements);
    for (std::size_t i = 0; i < k; ++i) {
      jp[i] = jac[i].j_t;
      jn[i] = jac[i].j_xi;
    }
    const SchurSystem sys = detail::assemble_schur_blocks(jp, jn, winv, res);
    auto [delta_t, xis] = schur_solve(sys);

    const double obj = detail::weighted_objective(res, winv);
    const bool damp =
        detail::update_inf_norm(delta_t, xis, 1.0) > detail::kDampingThreshold;
    double scale = 1.0;
    detail::TransState next;
    for (int halvings = 0; halvings <= 10; ++halvings) {
      if (halvings == 10) scale = 1.0;  // line search failed: full step
      next.t_hat = st.t_hat + scale * delta_t;
      next.RA_hat.resize(k);
      for (std::size_t i = 0; i < k; ++i)
        next.RA_hat[i] = exp_so3(scale * xis[i]) * st.RA_hat[i];
      if (!damp || halvings == 10) break;
      const auto next_res = detail::trans_residuals(next, measurements);
      if (detail::objective_acceptable(
              detail::weighted_objective(next_res, winv), obj))
        break;
      scale *= 0.5;
    }

    const double update_norm = detail::update_inf_norm(delta_t, xis, scale);
    st = next;
    sol.iterations = iter + 1;
    sol.final_update_norm = update_norm;
    converged = update_norm < kTol;
  }
  if (!converged)
    throw NoConvergenceError("solve_translation: no convergence after " +
                             std::to_string(kMaxIterations) + " iterations");

  const auto jac = build_translation_jacobian(st.t_hat, st.RA_hat);
  const auto res = detail::trans_residuals(st, measurements);
  for (std::size_t i = 0; i < k; ++i) {
    jp[i] = jac[i].j_t;
    jn[i] = jac[i].j_xi;
  }
  const SchurSystem sys = detail::assemble_schur_blocks(jp, jn, winv, res);
  const Mat3 s = detail::schur_complement(sys);
  if (detail::condition_number(s) > 1e12)
    throw RankDeficientError("solve_translation: singular information matrix");
  sol.translation = st.t_hat;
  sol.cov_trans = symmetrize(s.inverse());
  sol.refined_RAs = st.RA_hat;
  return sol;
}

// Full hand-eye pipeline: rotation first, then translation with the
// rotation covariance folded into the q weights.
inline std::pair<RotSolution, TransSolution> solve_axxb(
    const MeasurementSet& pairs) {
  if (pairs.size() < 2)
    throw DegenerateMotionError("solve_axxb: at least 2 pose pairs required");
  std::vector<RotMeasurement> rot_meas;
  rot_meas.reserve(pairs.size());
  for (const MeasurementPair& p : pairs)
    rot_meas.push_back(make_rot_measurement(p.A, p.B));
  RotSolution rot = solve_rotation(rot_meas);

  std::vector<TransMeasurement> trans_meas;
  trans_meas.reserve(pairs.size());
  for (const MeasurementPair& p : pairs)
    trans_meas.push_back(build_q(rot.rotation, rot.cov_rot, p.A, p.B));
  TransSolution trans = solve_translation(trans_meas);
  return {std::move(rot), std::move(trans)};
}

}  // namespace axxb
