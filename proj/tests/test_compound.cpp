#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numbers>
#include <vector>

#include "axxb/compound.hpp"
#include "axxb/noise.hpp"

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

NoisyPose random_noisy_pose(Rng& rng, double cov_scale) {
  NoisyPose p;
  p.R = random_rotation(rng);
  p.t = rng.normal3();
  p.cov_R = random_psd(rng, cov_scale);
  p.cov_t = random_psd(rng, cov_scale);
  return p;
}

// Empirical covariance of the compounded pose against the mean composition.
std::pair<Mat3, Mat3> mc_compound(std::span<const NoisyPose> chain,
                                  const DecoupledPose& mean, int samples,
                                  Rng& rng) {
  Mat3 cov_r = Mat3::Zero(), cov_t = Mat3::Zero();
  for (int s = 0; s < samples; ++s) {
    DecoupledPose acc = sample_pose(chain[0], rng);
    for (std::size_t i = 1; i < chain.size(); ++i)
      acc = compose(acc, sample_pose(chain[i], rng));
    const Vec3 xi_r = log_so3(acc.R * mean.R.transpose());
    const Vec3 xi_t = acc.t - mean.t;
    cov_r += xi_r * xi_r.transpose();
    cov_t += xi_t * xi_t.transpose();
  }
  return {cov_r / samples, cov_t / samples};
}

}  // namespace

TEST_CASE("bracket1 arithmetic") {
  CHECK((bracket1(Mat3::Identity()) + 2.0 * Mat3::Identity()).norm() == 0.0);
  CHECK(bracket1(Mat3::Zero()).isZero(0.0));
  const Mat3 out = bracket1(Vec3(1, 2, 3).asDiagonal());
  CHECK((out - Mat3(Vec3(-5, -4, -3).asDiagonal())).norm() == 0.0);
}

TEST_CASE("bracket2 arithmetic and duplicate-evaluation oracle") {
  Rng rng(1);
  CHECK(bracket2(Mat3::Zero(), random_psd(rng, 1.0)).isZero(0.0));
  CHECK((bracket2(Mat3::Identity(), Mat3::Identity()) -
         2.0 * Mat3::Identity())
            .norm() == 0.0);
  for (int i = 0; i < 50; ++i) {
    Mat3 m, n;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        m(r, c) = rng.normal();
        n(r, c) = rng.normal();
      }
    const Mat3 lhs = bracket2(m, n);
    // independent evaluation straight from the definition
    const Mat3 bm = -m.trace() * Mat3::Identity() + m;
    const Mat3 bn = -n.trace() * Mat3::Identity() + n;
    const Mat3 nm = n * m;
    const Mat3 rhs = bm * bn + (-nm.trace() * Mat3::Identity() + nm);
    CHECK((lhs - rhs).norm() < 1e-14);
  }
}

TEST_CASE("compound_poses zero-covariance composition") {
  Rng rng(2);
  NoisyPose p1, p2;
  p1.R = random_rotation(rng);
  p1.t = rng.normal3();
  p2.R = random_rotation(rng);
  p2.t = rng.normal3();
  const NoisyPose out = compound_poses(p1, p2);
  CHECK((out.R - p1.R * p2.R).norm() < 1e-12);
  CHECK((out.t - (p1.R * p2.t + p1.t)).norm() < 1e-12);
  CHECK(out.cov_R.isZero(1e-15));
  CHECK(out.cov_t.isZero(1e-15));
}

TEST_CASE("compound_poses term cancellation at R1=I, t2=0, cov_R1=0") {
  Rng rng(3);
  NoisyPose p1, p2;
  p1.t = rng.normal3();
  p1.cov_t = random_psd(rng, 1e-4);
  p2.R = random_rotation(rng);
  p2.cov_R = random_psd(rng, 1e-4);
  p2.cov_t = random_psd(rng, 1e-4);
  const NoisyPose out = compound_poses(p1, p2);
  CHECK((out.cov_t - (p1.cov_t + p2.cov_t)).norm() < 1e-15);
  // rotation block: with Sigma_R1 = 0 every bracket correction vanishes
  CHECK((out.cov_R - p2.cov_R).norm() < 1e-15);
}

TEST_CASE("compound_poses Monte-Carlo oracle at scale 1e-4") {
  Rng rng(4);
  std::vector<NoisyPose> chain{random_noisy_pose(rng, 1e-4 / 3.0),
                               random_noisy_pose(rng, 1e-4 / 3.0)};
  const NoisyPose pred = compound_poses(chain[0], chain[1]);
  Rng mc_rng(99);
  const auto [mc_r, mc_t] = mc_compound(chain, pred.mean(), 100000, mc_rng);
  CHECK((pred.cov_R - mc_r).norm() / mc_r.norm() < 0.05);
  CHECK((pred.cov_t - mc_t).norm() / mc_t.norm() < 0.05);
}

TEST_CASE("compound_poses outputs stay symmetric PSD") {
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const NoisyPose out = compound_poses(random_noisy_pose(rng, 1e-2 / 3.0),
                                         random_noisy_pose(rng, 1e-2 / 3.0));
    CHECK((out.cov_R - out.cov_R.transpose()).norm() < 1e-14);
    CHECK((out.cov_t - out.cov_t.transpose()).norm() < 1e-14);
    Eigen::SelfAdjointEigenSolver<Mat3> er(out.cov_R), et(out.cov_t);
    CHECK(er.eigenvalues().minCoeff() >= 0.0);
    CHECK(et.eigenvalues().minCoeff() >= 0.0);
  }
}

TEST_CASE("propagate_chain basics") {
  Rng rng(6);
  const NoisyPose single = random_noisy_pose(rng, 1e-4);
  std::vector<NoisyPose> one{single};
  const NoisyPose echoed = propagate_chain(one);
  CHECK((echoed.R - single.R).norm() == 0.0);
  CHECK((echoed.cov_R - single.cov_R).norm() == 0.0);

  std::vector<NoisyPose> three(3);
  for (auto& p : three) {
    p.R = random_rotation(rng);
    p.t = rng.normal3();
  }
  const NoisyPose out = propagate_chain(three);
  const DecoupledPose direct =
      compose(compose(three[0].mean(), three[1].mean()), three[2].mean());
  CHECK((out.R - direct.R).norm() < 1e-12);
  CHECK((out.t - direct.t).norm() < 1e-12);
  CHECK(out.cov_R.isZero(1e-15));

  CHECK_THROWS_AS(propagate_chain(std::span<const NoisyPose>{}),
                  DimensionMismatchError);
}

TEST_CASE("propagate_chain three-pose Monte-Carlo oracle") {
  Rng rng(7);
  std::vector<NoisyPose> chain{random_noisy_pose(rng, 1e-4 / 3.0),
                               random_noisy_pose(rng, 1e-4 / 3.0),
                               random_noisy_pose(rng, 1e-4 / 3.0)};
  // the decoupled model drops the rotation/translation cross-covariance the
  // first compounding would create; zero it at the source so the MC oracle
  // isolates the propagation arithmetic
  chain[0].cov_R.setZero();
  const NoisyPose pred = propagate_chain(chain);
  Rng mc_rng(123);
  const auto [mc_r, mc_t] = mc_compound(chain, pred.mean(), 100000, mc_rng);
  CHECK((pred.cov_R - mc_r).norm() / mc_r.norm() < 0.05);
  CHECK((pred.cov_t - mc_t).norm() / mc_t.norm() < 0.05);
}
