#pragma once

// Iterative covariance-weighted estimation of the rotation part of X,
// with a Procrustes closed-form initializer and the blockwise Schur
// elimination of the per-measurement nuisance parameters.

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <vector>

#include "axxb/errors.hpp"
#include "axxb/liegroup.hpp"
#include "axxb/noise.hpp"

namespace axxb {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat63 = Eigen::Matrix<double, 6, 3>;

struct RotMeasurement {
  Vec3 alpha;      // log of R_A
  Vec3 beta;       // log of R_B
  Mat3 cov_alpha;
  Mat3 cov_beta;
};

struct RotSolution {
  Mat3 rotation = Mat3::Identity();
  Mat3 cov_rot = Mat3::Zero();
  std::vector<Vec3> refined_betas;
  int iterations = 0;
  double final_update_norm = 0.0;
};

// Arrow-shaped normal equations: one 3x3 primary block U coupled through
// W_i to independent 3x3 nuisance blocks Z_i.
struct SchurSystem {
  Mat3 U = Mat3::Zero();
  std::vector<Mat3> W_blocks;
  std::vector<Mat3> Z_blocks;
  Vec3 eps_primary = Vec3::Zero();
  std::vector<Vec3> eps_blocks;
};

struct RotJacobianBlocks {
  Mat63 j_xi;    // w.r.t. the rotation update xi_R
  Mat63 j_beta;  // w.r.t. the refined beta_i
};

namespace detail {

// Rank-deficient blocks (perfect measurements) are legal, so the jitter is
// applied unconditionally before inversion; it is negligible against any
// genuine measurement covariance.
inline Mat3 invert_weight(const Mat3& cov) {
  const Mat3 c = cov + 1e-15 * Mat3::Identity();
  Eigen::LLT<Mat3> llt(c);
  if (llt.info() != Eigen::Success)
    throw NonPsdError("measurement covariance block is not PSD");
  return llt.solve(Mat3::Identity());
}

inline double condition_number(const Mat3& m) {
  Eigen::SelfAdjointEigenSolver<Mat3> eig(m);
  const double lmin = eig.eigenvalues().minCoeff();
  const double lmax = eig.eigenvalues().maxCoeff();
  if (!(lmin > 0.0)) return std::numeric_limits<double>::infinity();
  return lmax / lmin;
}

// Shared assembly for both solvers: primary/nuisance 6x3 blocks, per
// measurement 6x6 inverse weights and 6-vector residuals.
inline SchurSystem assemble_schur_blocks(std::span<const Mat63> j_primary,
                                         std::span<const Mat63> j_nuisance,
                                         std::span<const Mat6> weight_inv,
                                         std::span<const Vec6> residuals) {
  const std::size_t k = j_primary.size();
  if (j_nuisance.size() != k || weight_inv.size() != k || residuals.size() != k)
    throw DimensionMismatchError("assemble_schur: block count mismatch");
  SchurSystem sys;
  sys.W_blocks.resize(k);
  sys.Z_blocks.resize(k);
  sys.eps_blocks.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    const Mat63 wp = weight_inv[i] * j_primary[i];
    sys.U += j_primary[i].transpose() * wp;
    sys.W_blocks[i] = wp.transpose() * j_nuisance[i];
    sys.Z_blocks[i] =
        j_nuisance[i].transpose() * weight_inv[i] * j_nuisance[i];
    sys.Z_blocks[i] = symmetrize(sys.Z_blocks[i]);
    sys.eps_primary += j_primary[i].transpose() * weight_inv[i] * residuals[i];
    sys.eps_blocks[i] =
        j_nuisance[i].transpose() * weight_inv[i] * residuals[i];
    if (condition_number(sys.Z_blocks[i]) > 1e12)
      throw SingularBlockError("assemble_schur: singular nuisance block " +
                               std::to_string(i));
  }
  sys.U = symmetrize(sys.U);
  return sys;
}

inline Mat3 schur_complement(const SchurSystem& sys) {
  Mat3 s = sys.U;
  for (std::size_t i = 0; i < sys.W_blocks.size(); ++i)
    s -= sys.W_blocks[i] * sys.Z_blocks[i].inverse() *
         sys.W_blocks[i].transpose();
  return symmetrize(s);
}

}  // namespace detail

// Exact per the Jacobian block layout of the stacked measurement model:
// J_i^{xi_R} = [0; -[R_hat beta_i]],  J_i^{beta} = [I; R_hat].
inline std::vector<RotJacobianBlocks> build_rotation_jacobian(
    const Mat3& R_hat, std::span<const Vec3> betas) {
  std::vector<RotJacobianBlocks> blocks(betas.size());
  for (std::size_t i = 0; i < betas.size(); ++i) {
    blocks[i].j_xi.topRows<3>().setZero();
    blocks[i].j_xi.bottomRows<3>() = -hat(R_hat * betas[i]);
    blocks[i].j_beta.topRows<3>() = Mat3::Identity();
    blocks[i].j_beta.bottomRows<3>() = R_hat;
  }
  return blocks;
}

inline SchurSystem assemble_schur(
    std::span<const RotJacobianBlocks> jac_blocks,
    std::span<const std::pair<Mat3, Mat3>> cov_blocks,  // (cov_beta, cov_alpha)
    std::span<const Vec6> residuals) {
  const std::size_t k = jac_blocks.size();
  std::vector<Mat63> jp(k), jn(k);
  std::vector<Mat6> winv(k);
  for (std::size_t i = 0; i < k; ++i) {
    jp[i] = jac_blocks[i].j_xi;
    jn[i] = jac_blocks[i].j_beta;
    winv[i].setZero();
    winv[i].topLeftCorner<3, 3>() = detail::invert_weight(cov_blocks[i].first);
    winv[i].bottomRightCorner<3, 3>() =
        detail::invert_weight(cov_blocks[i].second);
  }
  return detail::assemble_schur_blocks(jp, jn, winv, residuals);
}

// Solves (U - W Z^-1 W^T) xi = eps_primary - W Z^-1 eps, then back-substitutes
// the nuisance updates from Z delta = eps - W^T xi.
inline std::pair<Vec3, std::vector<Vec3>> schur_solve(const SchurSystem& sys) {
  const Mat3 s = detail::schur_complement(sys);
  if (detail::condition_number(s) > 1e12)
    throw RankDeficientError("schur_solve: singular Schur complement");
  Vec3 rhs = sys.eps_primary;
  for (std::size_t i = 0; i < sys.W_blocks.size(); ++i)
    rhs -= sys.W_blocks[i] * sys.Z_blocks[i].inverse() * sys.eps_blocks[i];
  const Vec3 xi = s.ldlt().solve(rhs);
  std::vector<Vec3> deltas(sys.W_blocks.size());
  for (std::size_t i = 0; i < sys.W_blocks.size(); ++i)
    deltas[i] = sys.Z_blocks[i].ldlt().solve(
        sys.eps_blocks[i] - sys.W_blocks[i].transpose() * xi);
  return {xi, deltas};
}

// Orthogonal Procrustes on the stacked rotation vectors:
// argmin_R sum ||alpha_i - R beta_i||^2.
inline Mat3 closed_form_rotation(std::span<const RotMeasurement> measurements) {
  if (measurements.size() < 2)
    throw DegenerateMotionError(
        "closed_form_rotation: at least 2 measurements required");
  Eigen::MatrixXd stacked(measurements.size(), 3);
  Mat3 n = Mat3::Zero();
  for (std::size_t i = 0; i < measurements.size(); ++i) {
    stacked.row(i) = measurements[i].alpha.transpose();
    n += measurements[i].beta * measurements[i].alpha.transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> rank_svd(stacked);
  if (rank_svd.singularValues()(1) <= 1e-6 * rank_svd.singularValues()(0))
    throw DegenerateMotionError(
        "closed_form_rotation: rotation axes are mutually parallel");
  Eigen::JacobiSVD<Mat3> svd(n, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0
                ? -1.0
                : 1.0;
  return svd.matrixV() * d * svd.matrixU().transpose();
}

namespace detail {

struct RotState {
  Mat3 R_hat;
  std::vector<Vec3> beta_hat;
};

inline std::vector<Vec6> rot_residuals(
    const RotState& st, std::span<const RotMeasurement> meas) {
  std::vector<Vec6> r(meas.size());
  for (std::size_t i = 0; i < meas.size(); ++i) {
    r[i].head<3>() = meas[i].beta - st.beta_hat[i];
    r[i].tail<3>() = meas[i].alpha - st.R_hat * st.beta_hat[i];
  }
  return r;
}

inline double weighted_objective(std::span<const Vec6> residuals,
                                 std::span<const Mat6> weight_inv) {
  double obj = 0.0;
  for (std::size_t i = 0; i < residuals.size(); ++i)
    obj += residuals[i].dot(weight_inv[i] * residuals[i]);
  return obj;
}

inline bool objective_acceptable(double next_obj, double obj) {
  return next_obj <= obj;
}

// Damping guards against overshoot of macroscopic steps. Below this size the
// linearization is trusted and the full step is taken; the monitored
// objective can differ from the true stationarity condition by more than the
// step's effect there, which would otherwise stall the iteration. For the
// same reason, a failed line search falls back to the full step instead of
// the deepest halving: near the fixed point no scale decreases the monitored
// objective, and the full step is the one that terminates the iteration.
inline constexpr double kDampingThreshold = 1e-6;

template <typename Block>
double update_inf_norm(const Vec3& primary, const std::vector<Block>& blocks,
                       double scale) {
  double norm = (scale * primary).cwiseAbs().maxCoeff();
  for (const auto& b : blocks)
    norm = std::max(norm, (scale * b).cwiseAbs().maxCoeff());
  return norm;
}

}  // namespace detail

inline RotSolution solve_rotation(std::span<const RotMeasurement> measurements,
                                  std::optional<Mat3> init = std::nullopt) {
  if (measurements.size() < 2)
    throw DegenerateMotionError(
        "solve_rotation: at least 2 measurements required");
  constexpr int kMaxIterations = 100;
  constexpr double kTol = 1e-12;
  const std::size_t k = measurements.size();

  detail::RotState st;
  st.R_hat = init ? validate_rotation(*init) : closed_form_rotation(measurements);
  st.beta_hat.resize(k);
  std::vector<std::pair<Mat3, Mat3>> covs(k);
  std::vector<Mat6> winv(k);
  for (std::size_t i = 0; i < k; ++i) {
    st.beta_hat[i] = measurements[i].beta;
    covs[i] = {measurements[i].cov_beta, measurements[i].cov_alpha};
    winv[i].setZero();
    winv[i].topLeftCorner<3, 3>() = detail::invert_weight(covs[i].first);
    winv[i].bottomRightCorner<3, 3>() = detail::invert_weight(covs[i].second);
  }

  RotSolution sol;
  bool converged = false;
  for (int iter = 0; iter < kMaxIterations && !converged; ++iter) {
    const auto jac = build_rotation_jacobian(st.R_hat, st.beta_hat);
    const auto res = detail::rot_residuals(st, measurements);
    const SchurSystem sys = assemble_schur(jac, covs, res);
    auto [xi, deltas] = schur_solve(sys);

    const double obj = detail::weighted_objective(res, winv);
    const bool damp =
        detail::update_inf_norm(xi, deltas, 1.0) > detail::kDampingThreshold;
    double scale = 1.0;
    detail::RotState next;
    for (int halvings = 0; halvings <= 10; ++halvings) {
      if (halvings == 10) scale = 1.0;  // line search failed: full step
      next.R_hat = exp_so3(scale * xi) * st.R_hat;
      next.beta_hat.resize(k);
      for (std::size_t i = 0; i < k; ++i)
        next.beta_hat[i] = st.beta_hat[i] + scale * deltas[i];
      if (!damp || halvings == 10) break;
      const auto next_res = detail::rot_residuals(next, measurements);
      if (detail::objective_acceptable(
              detail::weighted_objective(next_res, winv), obj))
        break;
      scale *= 0.5;
    }

    const double update_norm = detail::update_inf_norm(xi, deltas, scale);
    st = next;
    sol.iterations = iter + 1;
    sol.final_update_norm = update_norm;
    converged = update_norm < kTol;
  }
  if (!converged)
    throw NoConvergenceError("solve_rotation: no convergence after " +
                             std::to_string(kMaxIterations) + " iterations");

  // Covariance from the backward rule, evaluated at the converged state.
  const auto jac = build_rotation_jacobian(st.R_hat, st.beta_hat);
  const auto res = detail::rot_residuals(st, measurements);
  const SchurSystem sys = assemble_schur(jac, covs, res);
  const Mat3 s = detail::schur_complement(sys);
  if (detail::condition_number(s) > 1e12)
    throw RankDeficientError("solve_rotation: singular information matrix");
  sol.rotation = st.R_hat;
  sol.cov_rot = symmetrize(s.inverse());
  sol.refined_betas = st.beta_hat;
  return sol;
}

// Builds the rotation measurement (logs plus rotation-vector covariances)
// from a noisy (A, B) pair.
inline RotMeasurement make_rot_measurement(const NoisyPose& A,
                                           const NoisyPose& B) {
  RotMeasurement m;
  m.alpha = log_so3(A.R);
  m.beta = log_so3(B.R);
  m.cov_alpha = rotvec_covariance(m.alpha, A.cov_R);
  m.cov_beta = rotvec_covariance(m.beta, B.cov_R);
  return m;
}

}  // namespace axxb
