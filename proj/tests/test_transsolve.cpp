#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numbers>
#include <vector>

#include "axxb/datagen.hpp"
#include "axxb/transsolve.hpp"

using namespace axxb;

namespace {

Mat3 random_rotation(Rng& rng) {
  return exp_so3(rng.uniform(0.1, std::numbers::pi - 0.1) * rng.unit_vector());
}

Mat3 random_psd(Rng& rng, double scale) {
  Mat3 a;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) a(r, c) = rng.normal();
  return scale * (a * a.transpose()) + scale * 0.1 * Mat3::Identity();
}

// Exact translation measurements q_i = (R_A_i - I) t with tiny covariances.
std::vector<TransMeasurement> exact_measurements(const Vec3& t, int k,
                                                 Rng& rng) {
  std::vector<TransMeasurement> meas(k);
  for (int i = 0; i < k; ++i) {
    meas[i].R_A = random_rotation(rng);
    meas[i].q = (meas[i].R_A - Mat3::Identity()) * t;
    meas[i].cov_RA = 1e-8 * Mat3::Identity();
    meas[i].cov_q = 1e-8 * Mat3::Identity();
  }
  return meas;
}

// Stacked model value f(P): per measurement (log of R_A_hat as rotation-head
// anchor is handled via group perturbation in the FD test below).
Eigen::VectorXd stacked_tail(const Vec3& t_hat,
                             std::span<const Mat3> ra_hats) {
  Eigen::VectorXd f(3 * ra_hats.size());
  for (std::size_t i = 0; i < ra_hats.size(); ++i)
    f.segment<3>(3 * i) = (ra_hats[i] - Mat3::Identity()) * t_hat;
  return f;
}

}  // namespace

TEST_CASE("build_q composition of the three noise sources") {
  // all covariances zero -> exact q, zero cov
  NoisyPose a, b;
  a.R = exp_so3(Vec3(0.2, -0.1, 0.4));
  a.t = Vec3(1, 2, 3);
  b.R = exp_so3(Vec3(-0.3, 0.5, 0.1));
  b.t = Vec3(-0.5, 0.25, 1.5);
  Rng rng(1);
  const Mat3 r_star = random_rotation(rng);
  TransMeasurement m = build_q(r_star, Mat3::Zero(), a, b);
  CHECK((m.q - (r_star * b.t - a.t)).norm() < 1e-14);
  CHECK(m.cov_q.isZero(0.0));
  CHECK((m.R_A - a.R).norm() == 0.0);

  // R* = I, t_B = 0: third term vanishes, cov_q = cov_tA + cov_tB
  a.cov_t = random_psd(rng, 1.0);
  b.cov_t = random_psd(rng, 1.0);
  b.t = Vec3::Zero();
  m = build_q(Mat3::Identity(), random_psd(rng, 1.0), a, b);
  CHECK((m.cov_q - (a.cov_t + b.cov_t)).norm() < 1e-12);
}

TEST_CASE("build_q Monte-Carlo oracle") {
  Rng rng(7);
  NoisyPose a, b;
  a.R = random_rotation(rng);
  a.t = Vec3(0.3, -1.0, 0.6);
  a.cov_t = random_psd(rng, 1e-4 / 3.0);
  b.R = random_rotation(rng);
  b.t = Vec3(1.2, 0.4, -0.8);
  b.cov_t = random_psd(rng, 1e-4 / 3.0);
  const Mat3 r_bar = random_rotation(rng);
  const Mat3 cov_r_star = random_psd(rng, 1e-4 / 3.0);
  const TransMeasurement m = build_q(r_bar, cov_r_star, a, b);

  const Mat3 l_ta = cholesky_psd(a.cov_t);
  const Mat3 l_tb = cholesky_psd(b.cov_t);
  const Mat3 l_r = cholesky_psd(cov_r_star);
  const int n = 100000;
  Mat3 acc = Mat3::Zero();
  for (int i = 0; i < n; ++i) {
    const Mat3 r_star = exp_so3(l_r * rng.normal3()) * r_bar;
    const Vec3 ta = a.t + l_ta * rng.normal3();
    const Vec3 tb = b.t + l_tb * rng.normal3();
    const Vec3 d = (r_star * tb - ta) - m.q;
    acc += d * d.transpose();
  }
  const Mat3 emp = acc / n;
  CHECK((m.cov_q - emp).norm() / emp.norm() < 0.10);
}

TEST_CASE("build_translation_jacobian trivial structure") {
  std::vector<Mat3> ras{Mat3::Identity()};
  auto blocks = build_translation_jacobian(Vec3(1, 2, 3), ras);
  CHECK(blocks[0].j_t.bottomRows<3>().isZero(0.0));
  Rng rng(2);
  ras[0] = random_rotation(rng);
  blocks = build_translation_jacobian(Vec3::Zero(), ras);
  CHECK(blocks[0].j_xi.bottomRows<3>().isZero(0.0));
  CHECK((blocks[0].j_xi.topRows<3>() - Mat3::Identity()).norm() == 0.0);
}

TEST_CASE("build_translation_jacobian matches central finite differences") {
  Rng rng(3);
  const double h = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    const Vec3 t_hat = rng.normal3();
    std::vector<Mat3> ras{random_rotation(rng)};
    const auto blocks = build_translation_jacobian(t_hat, ras);
    // translation columns act only on the tail rows
    for (int c = 0; c < 3; ++c) {
      Vec3 e = Vec3::Zero();
      e(c) = h;
      const Eigen::VectorXd fp = stacked_tail(t_hat + e, ras);
      const Eigen::VectorXd fm = stacked_tail(t_hat - e, ras);
      CHECK((blocks[0].j_t.bottomRows<3>().col(c) - (fp - fm) / (2.0 * h))
                .norm() < 1e-5);
      CHECK(blocks[0].j_t.topRows<3>().col(c).norm() == 0.0);
    }
    // xi_RA columns: head rows are the group perturbation itself (identity
    // Jacobian), tail rows differentiate (exp([xi]) R_A - I) t_hat
    for (int c = 0; c < 3; ++c) {
      Vec3 e = Vec3::Zero();
      e(c) = h;
      std::vector<Mat3> rp{exp_so3(e) * ras[0]}, rm{exp_so3(-e) * ras[0]};
      const Eigen::VectorXd fp = stacked_tail(t_hat, rp);
      const Eigen::VectorXd fm = stacked_tail(t_hat, rm);
      CHECK((blocks[0].j_xi.bottomRows<3>().col(c) - (fp - fm) / (2.0 * h))
                .norm() < 1e-5);
      const Vec3 head_fd =
          (log_so3(rp[0] * ras[0].transpose()) -
           log_so3(rm[0] * ras[0].transpose())) /
          (2.0 * h);
      CHECK((blocks[0].j_xi.topRows<3>().col(c) - head_fd).norm() < 1e-5);
    }
  }
}

TEST_CASE("solve_translation noise-free recovery") {
  Rng rng(4);
  const Vec3 t_true(0.7, -1.3, 0.4);
  const auto meas = exact_measurements(t_true, 30, rng);
  const TransSolution sol = solve_translation(meas);
  CHECK((sol.translation - t_true).norm() < 1e-9);
  CHECK((sol.cov_trans - sol.cov_trans.transpose()).norm() < 1e-14);
  Eigen::SelfAdjointEigenSolver<Mat3> eig(sol.cov_trans);
  CHECK(eig.eigenvalues().minCoeff() > -1e-18);
}

TEST_CASE("solve_translation unobservable cases") {
  // all R_A = I: (R_A - I) t = 0 carries no information
  std::vector<TransMeasurement> meas(5);
  for (auto& m : meas) {
    m.R_A = Mat3::Identity();
    m.q = Vec3::Zero();
    m.cov_RA = 1e-6 * Mat3::Identity();
    m.cov_q = 1e-6 * Mat3::Identity();
  }
  CHECK_THROWS_AS(solve_translation(meas), RankDeficientError);
  CHECK_THROWS_AS(solve_translation(std::span(meas.data(), 1)),
                  DegenerateMotionError);
}

TEST_CASE("solve_translation reduces to weighted LLS when R_A noise vanishes") {
  Rng rng(5);
  const Vec3 t_true(0.2, 0.9, -0.5);
  auto meas = exact_measurements(t_true, 10, rng);
  for (auto& m : meas) {
    m.cov_RA = Mat3::Zero();  // pinned rotations
    m.cov_q = random_psd(rng, 1.0);
  }
  const TransSolution sol = solve_translation(meas);
  Mat3 info = Mat3::Zero();
  for (const auto& m : meas) {
    const Mat3 a = m.R_A - Mat3::Identity();
    info += a.transpose() * m.cov_q.inverse() * a;
  }
  const Mat3 lls_cov = info.inverse();
  CHECK((sol.cov_trans - lls_cov).norm() / lls_cov.norm() < 1e-6);
  CHECK((sol.translation - t_true).norm() < 1e-9);
}

TEST_CASE("solve_translation covariance is first-order homogeneous") {
  Rng rng(6);
  const Vec3 t_true(1.1, -0.3, 0.8);
  auto meas = exact_measurements(t_true, 8, rng);
  for (auto& m : meas) {
    m.cov_RA = random_psd(rng, 1e-5);
    m.cov_q = random_psd(rng, 1e-5);
  }
  auto scaled = meas;
  const double c = 5.0;
  for (auto& m : scaled) {
    m.cov_RA *= c;
    m.cov_q *= c;
  }
  const TransSolution a = solve_translation(meas);
  const TransSolution b = solve_translation(scaled);
  CHECK((b.cov_trans - c * a.cov_trans).norm() / (c * a.cov_trans.norm()) <
        1e-9);
}

TEST_CASE("solve_axxb noise-free end-to-end recovery") {
  Rng xr(9);
  const DecoupledPose x_true = random_pose(xr);
  SyntheticConfig cfg;
  cfg.lambda = 0.0;
  cfg.k = 30;
  const MeasurementSet set = generate_dataset(cfg, x_true, 11);
  const auto [rot, trans] = solve_axxb(set);
  CHECK((rot.rotation - x_true.R).norm() < 1e-9);
  CHECK((trans.translation - x_true.t).norm() < 1e-9);
  // equation residuals R_Ai t* + t_Ai = R* t_Bi + t*
  for (const auto& p : set) {
    const Vec3 lhs = p.A.R * trans.translation + p.A.t;
    const Vec3 rhs = rot.rotation * p.B.t + trans.translation;
    CHECK((lhs - rhs).norm() < 1e-9);
  }
}

TEST_CASE("solve_axxb rejects underdetermined input") {
  Rng xr(12);
  const DecoupledPose x_true = random_pose(xr);
  SyntheticConfig cfg;
  cfg.k = 1;
  const MeasurementSet set = generate_dataset(cfg, x_true, 13);
  CHECK_THROWS_AS(solve_axxb(set), DegenerateMotionError);
}
