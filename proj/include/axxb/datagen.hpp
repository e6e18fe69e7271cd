#pragma once

// Synthetic dataset generation, Monte-Carlo covariance estimation and the
// relative Frobenius comparison metric.

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "axxb/errors.hpp"
#include "axxb/liegroup.hpp"
#include "axxb/noise.hpp"
#include "axxb/transsolve.hpp"

namespace axxb {

struct SyntheticConfig {
  double lambda = 1e-5;
  int k = 30;
  int M = 1000;
  std::uint64_t seed = 0;
  Mat3 cov_RA_base = Vec3(0.5, 0.2, 0.3).asDiagonal();
  Mat3 cov_RB_base = Vec3(0.7, 0.2, 0.8).asDiagonal();
  Mat3 cov_tA_base = Vec3(0.1, 0.2, 0.5).asDiagonal();
  Mat3 cov_tB_base = Vec3(0.7, 0.8, 0.1).asDiagonal();
};

struct McReport {
  Mat3 cov_rot_mc = Mat3::Zero();
  Mat3 cov_trans_mc = Mat3::Zero();
  Mat3 cov_rot_pred = Mat3::Zero();
  Mat3 cov_trans_pred = Mat3::Zero();
  double eps_rot = 0.0;
  double eps_trans = 0.0;
  bool degenerate = false;  // MC covariance too small for the metric
};

// Random exact pair: A with uniform axis, angle in [0.1, pi-0.1], translation
// uniform in [-1,1]^3; B = X^-1 A X so that A X = X B holds exactly.
inline std::pair<DecoupledPose, DecoupledPose> generate_true_pair(
    const DecoupledPose& X_true, Rng& rng) {
  const Vec3 axis = rng.unit_vector();
  const double angle = rng.uniform(0.1, std::numbers::pi - 0.1);
  DecoupledPose a;
  a.R = exp_so3(angle * axis);
  a.t = Vec3(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
             rng.uniform(-1.0, 1.0));
  const DecoupledPose b = compose(compose(inverse(X_true), a), X_true);
  return {a, b};
}

inline std::pair<DecoupledPose, DecoupledPose> generate_true_pair(
    const DecoupledPose& X_true, std::uint64_t rng_seed) {
  Rng rng(rng_seed);
  return generate_true_pair(X_true, rng);
}

using TruePairs = std::vector<std::pair<DecoupledPose, DecoupledPose>>;

inline TruePairs generate_true_pairs(int k, const DecoupledPose& X_true,
                                     std::uint64_t seed) {
  if (k < 1) throw Error("generate_true_pairs: k must be >= 1");
  Rng rng(seed);
  TruePairs pairs;
  pairs.reserve(k);
  for (int i = 0; i < k; ++i) pairs.push_back(generate_true_pair(X_true, rng));
  return pairs;
}

// Corrupts exact pairs with lambda-scaled noise; each measurement carries
// its true covariances.
inline MeasurementSet corrupt_pairs(const SyntheticConfig& cfg,
                                    const TruePairs& true_pairs,
                                    std::uint64_t seed) {
  const Mat3 cov_ra = cfg.lambda * cfg.cov_RA_base;
  const Mat3 cov_rb = cfg.lambda * cfg.cov_RB_base;
  const Mat3 cov_ta = cfg.lambda * cfg.cov_tA_base;
  const Mat3 cov_tb = cfg.lambda * cfg.cov_tB_base;
  Rng rng(seed);
  MeasurementSet set;
  set.reserve(true_pairs.size());
  for (const auto& [a_bar, b_bar] : true_pairs) {
    MeasurementPair pair;
    const DecoupledPose a = sample_noisy_pose(a_bar, cov_ra, cov_ta, rng);
    const DecoupledPose b = sample_noisy_pose(b_bar, cov_rb, cov_tb, rng);
    pair.A = {a.R, a.t, cov_ra, cov_ta};
    pair.B = {b.R, b.t, cov_rb, cov_tb};
    set.push_back(pair);
  }
  return set;
}

// k corrupted pairs over freshly drawn exact pairs.
inline MeasurementSet generate_dataset(const SyntheticConfig& cfg,
                                       const DecoupledPose& X_true,
                                       std::uint64_t seed) {
  return corrupt_pairs(cfg, generate_true_pairs(cfg.k, X_true, seed),
                       seed + 0x9e3779b9U);
}

inline MeasurementSet generate_dataset(const SyntheticConfig& cfg,
                                       const DecoupledPose& X_true) {
  return generate_dataset(cfg, X_true, cfg.seed);
}

// Errors are taken against the given truth, without mean subtraction.
inline std::pair<Mat3, Mat3> mc_covariance(
    std::span<const DecoupledPose> estimates, const DecoupledPose& truth) {
  if (estimates.size() < 2)
    throw Error("mc_covariance: at least 2 estimates required");
  Mat3 cov_r = Mat3::Zero();
  Mat3 cov_t = Mat3::Zero();
  for (const DecoupledPose& est : estimates) {
    const Vec3 xi_r = log_so3(est.R * truth.R.transpose());
    const Vec3 xi_t = est.t - truth.t;
    cov_r += xi_r * xi_r.transpose();
    cov_t += xi_t * xi_t.transpose();
  }
  const double inv_m = 1.0 / static_cast<double>(estimates.size());
  return {symmetrize(inv_m * cov_r), symmetrize(inv_m * cov_t)};
}

// epsilon = ||pred - mc||_F / ||mc||_F
inline double eps_metric(const Mat3& pred, const Mat3& mc) {
  const double denom = mc.norm();
  if (denom == 0.0)
    throw DivisionByZeroError("eps_metric: MC covariance is zero");
  return (pred - mc).norm() / denom;
}

struct EmpiricalCovariance {
  Mat3 cov_rot = Mat3::Zero();
  Mat3 cov_trans = Mat3::Zero();
  Vec3 mean_rot = Vec3::Zero();
  Vec3 mean_trans = Vec3::Zero();
  bool bias_warning = false;  // error mean inconsistent with zero
};

// Per-pair B errors against the ground truth B_bar_i = X_ref^-1 A_i X_ref,
// assuming identical noise across pairs.
inline EmpiricalCovariance empirical_B_covariance(const MeasurementSet& pairs,
                                                  const DecoupledPose& X_ref) {
  if (pairs.empty())
    throw Error("empirical_B_covariance: empty measurement set");
  EmpiricalCovariance out;
  const std::size_t n = pairs.size();
  std::vector<Vec3> xi_r(n), xi_t(n);
  for (std::size_t i = 0; i < n; ++i) {
    const DecoupledPose b_bar =
        compose(compose(inverse(X_ref), pairs[i].A.mean()), X_ref);
    xi_r[i] = log_so3(pairs[i].B.R * b_bar.R.transpose());
    xi_t[i] = pairs[i].B.t - b_bar.t;
    out.mean_rot += xi_r[i];
    out.mean_trans += xi_t[i];
  }
  out.mean_rot /= static_cast<double>(n);
  out.mean_trans /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.cov_rot += xi_r[i] * xi_r[i].transpose();
    out.cov_trans += xi_t[i] * xi_t[i].transpose();
  }
  out.cov_rot = symmetrize(out.cov_rot / static_cast<double>(n));
  out.cov_trans = symmetrize(out.cov_trans / static_cast<double>(n));
  // A zero-mean error has E||mean||^2 = tr(cov)/n; flag means far beyond that.
  out.bias_warning =
      out.mean_rot.squaredNorm() >
          9.0 * out.cov_rot.trace() / static_cast<double>(n) ||
      out.mean_trans.squaredNorm() >
          9.0 * out.cov_trans.trace() / static_cast<double>(n);
  return out;
}

// R_avg = exp([mean of log R_m]), t_avg = mean of t_m.
inline DecoupledPose average_solution(std::span<const DecoupledPose> solutions) {
  if (solutions.empty())
    throw Error("average_solution: empty solution list");
  for (std::size_t i = 0; i < solutions.size(); ++i)
    for (std::size_t j = i + 1; j < solutions.size(); ++j) {
      const double c = std::clamp(
          ((solutions[i].R.transpose() * solutions[j].R).trace() - 1.0) * 0.5,
          -1.0, 1.0);
      if (std::acos(c) > std::numbers::pi / 2.0)
        throw LogBranchAmbiguityError(
            "average_solution: solutions more than pi/2 apart");
    }
  Vec3 mean_log = Vec3::Zero();
  Vec3 mean_t = Vec3::Zero();
  for (const DecoupledPose& s : solutions) {
    mean_log += log_so3(s.R);
    mean_t += s.t;
  }
  const double inv_m = 1.0 / static_cast<double>(solutions.size());
  return {exp_so3(inv_m * mean_log), inv_m * mean_t};
}

// Full predicted-vs-Monte-Carlo comparison: corrupt the same exact pairs M
// times with independent noise, take the prediction from the first dataset,
// estimate the MC covariance across all of them. The covariance prediction
// is conditional on the pair geometry, so the geometry stays fixed.
inline McReport run_validation(const SyntheticConfig& cfg,
                               const DecoupledPose& X_true) {
  if (cfg.M < 2) throw Error("run_validation: M must be >= 2");
  McReport report;
  const TruePairs true_pairs = generate_true_pairs(cfg.k, X_true, cfg.seed);
  std::vector<DecoupledPose> estimates;
  estimates.reserve(cfg.M);
  for (int m = 0; m < cfg.M; ++m) {
    const MeasurementSet set = corrupt_pairs(
        cfg, true_pairs, cfg.seed + 1 + static_cast<std::uint64_t>(m));
    const auto [rot, trans] = solve_axxb(set);
    estimates.push_back({rot.rotation, trans.translation});
    if (m == 0) {
      report.cov_rot_pred = rot.cov_rot;
      report.cov_trans_pred = trans.cov_trans;
    }
  }
  std::tie(report.cov_rot_mc, report.cov_trans_mc) =
      mc_covariance(estimates, X_true);
  if (report.cov_rot_mc.norm() < 1e-30 || report.cov_trans_mc.norm() < 1e-30) {
    report.degenerate = true;
    return report;
  }
  report.eps_rot = eps_metric(report.cov_rot_pred, report.cov_rot_mc);
  report.eps_trans = eps_metric(report.cov_trans_pred, report.cov_trans_mc);
  return report;
}

// Random rotation + translation, used to draw the unknown X of a simulation.
inline DecoupledPose random_pose(Rng& rng) {
  const Vec3 axis = rng.unit_vector();
  const double angle = rng.uniform(0.1, std::numbers::pi - 0.1);
  return {exp_so3(angle * axis),
          Vec3(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
               rng.uniform(-1.0, 1.0))};
}

}  // namespace axxb
