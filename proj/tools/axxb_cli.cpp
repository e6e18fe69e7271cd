// Command-line front end: simulate / calibrate / validate / compound /
// ellipse. Machine-readable output goes to stdout or files, human summaries
// to stderr. Exit codes: 0 success, 2 usage, 3 validation, 4 degenerate
// geometry, 5 non-convergence.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "axxb/axxb.hpp"

namespace {

using namespace axxb;

Mat3 parse_cov_flag(const std::vector<double>& vals, const std::string& name) {
  if (vals.size() == 3) return Mat3(Vec3(vals[0], vals[1], vals[2]).asDiagonal());
  if (vals.size() == 9) {
    Mat3 m;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) m(r, c) = vals[3 * r + c];
    return m;
  }
  throw Error(name + ": expected 3 (diagonal) or 9 (row-major) values");
}

int cmd_simulate(double lambda, int k, std::uint64_t seed,
                 const std::string& out_path, const std::string& truth_path) {
  SyntheticConfig cfg;
  cfg.lambda = lambda;
  cfg.k = k;
  cfg.seed = seed;
  Rng x_rng(seed);
  const DecoupledPose x_true = random_pose(x_rng);
  const MeasurementSet set = generate_dataset(cfg, x_true, seed + 1);
  write_dataset(out_path, set);
  if (!truth_path.empty()) {
    TruthFile truth;
    truth.X = x_true;
    truth.cov_RA = lambda * cfg.cov_RA_base;
    truth.cov_RB = lambda * cfg.cov_RB_base;
    truth.cov_tA = lambda * cfg.cov_tA_base;
    truth.cov_tB = lambda * cfg.cov_tB_base;
    write_truth(truth_path, truth);
  }
  std::cerr << "wrote " << set.size() << " pairs to " << out_path
            << " (lambda=" << lambda << ", seed=" << seed << ")\n";
  return 0;
}

int cmd_calibrate(const std::string& dataset_path, const std::string& out_path,
                  const std::vector<double>& cov_ra,
                  const std::vector<double>& cov_rb,
                  const std::vector<double>& cov_ta,
                  const std::vector<double>& cov_tb) {
  MeasurementSet set = read_dataset(dataset_path);
  const bool assume = !cov_ra.empty() || !cov_rb.empty() || !cov_ta.empty() ||
                      !cov_tb.empty();
  if (assume) {
    if (cov_ra.empty() || cov_rb.empty() || cov_ta.empty() || cov_tb.empty())
      throw Error("--assume-cov-* flags must be given together");
    const Mat3 ra = parse_cov_flag(cov_ra, "--assume-cov-ra");
    const Mat3 rb = parse_cov_flag(cov_rb, "--assume-cov-rb");
    const Mat3 ta = parse_cov_flag(cov_ta, "--assume-cov-ta");
    const Mat3 tb = parse_cov_flag(cov_tb, "--assume-cov-tb");
    for (MeasurementPair& p : set) {
      p.A.cov_R = ra;
      p.B.cov_R = rb;
      p.A.cov_t = ta;
      p.B.cov_t = tb;
    }
  }
  const auto [rot, trans] = solve_axxb(set);
  ResultFile res;
  res.X = {rot.rotation, trans.translation};
  res.cov_R = rot.cov_rot;
  res.cov_t = trans.cov_trans;
  res.iterations_rot = rot.iterations;
  res.iterations_trans = trans.iterations;
  res.residual_rot = rot.final_update_norm;
  res.residual_trans = trans.final_update_norm;
  res.input_hash = file_hash(dataset_path);
  write_result(out_path, res);
  std::cerr << "calibration converged: rot " << rot.iterations
            << " iters, trans " << trans.iterations << " iters -> " << out_path
            << "\n";
  return 0;
}

void print_report(double lambda, const McReport& rep) {
  std::printf("lambda %.17g\n", lambda);
  std::printf("eps_rot %.17g\n", rep.eps_rot);
  std::printf("eps_trans %.17g\n", rep.eps_trans);
  std::printf("degenerate %d\n", rep.degenerate ? 1 : 0);
  auto print_mat = [](const char* key, const Mat3& m) {
    std::printf("%s", key);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) std::printf(" %.17g", m(r, c));
    std::printf("\n");
  };
  print_mat("cov_rot_pred", rep.cov_rot_pred);
  print_mat("cov_rot_mc", rep.cov_rot_mc);
  print_mat("cov_trans_pred", rep.cov_trans_pred);
  print_mat("cov_trans_mc", rep.cov_trans_mc);
}

int cmd_validate(const std::vector<double>& lambdas, int k, int M,
                 std::uint64_t seed) {
  SyntheticConfig cfg;
  cfg.k = k;
  cfg.M = M;
  cfg.seed = seed;
  Rng x_rng(seed);
  const DecoupledPose x_true = random_pose(x_rng);
  for (double lambda : lambdas) {
    cfg.lambda = lambda;
    const McReport rep = run_validation(cfg, x_true);
    print_report(lambda, rep);
    std::cerr << "lambda=" << lambda << ": eps_rot=" << rep.eps_rot
              << " eps_trans=" << rep.eps_trans
              << (rep.degenerate ? " (degenerate: MC covariance ~ 0)" : "")
              << "\n";
  }
  return 0;
}

int cmd_compound(const std::vector<std::string>& pose_paths,
                 const std::string& out_path, bool mc_check, int mc_samples,
                 std::uint64_t seed) {
  std::vector<NoisyPose> chain;
  chain.reserve(pose_paths.size());
  for (const std::string& p : pose_paths) chain.push_back(read_pose(p));
  const NoisyPose result = propagate_chain(chain);
  write_pose(out_path, result);
  std::cerr << "compounded " << chain.size() << " poses -> " << out_path << "\n";

  if (mc_check) {
    Rng rng(seed);
    Mat3 cov_r = Mat3::Zero(), cov_t = Mat3::Zero();
    for (int s = 0; s < mc_samples; ++s) {
      DecoupledPose acc = sample_pose(chain[0], rng);
      for (std::size_t i = 1; i < chain.size(); ++i)
        acc = compose(acc, sample_pose(chain[i], rng));
      const Vec3 xi_r = log_so3(acc.R * result.R.transpose());
      const Vec3 xi_t = acc.t - result.t;
      cov_r += xi_r * xi_r.transpose();
      cov_t += xi_t * xi_t.transpose();
    }
    cov_r /= static_cast<double>(mc_samples);
    cov_t /= static_cast<double>(mc_samples);
    const double err_r = eps_metric(result.cov_R, cov_r);
    const double err_t = eps_metric(result.cov_t, cov_t);
    std::printf("mc_check_rot %.17g\n", err_r);
    std::printf("mc_check_trans %.17g\n", err_t);
    if (err_r > 0.05 || err_t > 0.05) {
      std::cerr << "mc-check FAILED: rot " << err_r << ", trans " << err_t
                << " (limit 0.05)\n";
      return 3;
    }
    std::cerr << "mc-check passed: rot " << err_r << ", trans " << err_t << "\n";
  }
  return 0;
}

int cmd_ellipse(const std::string& result_path, const std::string& block,
                const std::string& axes, const std::string& out_path) {
  const ResultFile res = read_result(result_path);
  const Mat3& cov = (block == "rotation") ? res.cov_R : res.cov_t;
  int i = 0, j = 1;
  if (axes == "xy") {
    i = 0; j = 1;
  } else if (axes == "yz") {
    i = 1; j = 2;
  } else if (axes == "xz") {
    i = 0; j = 2;
  } else {
    throw Error("invalid axis pair '" + axes + "' (expected xy, yz or xz)");
  }
  Eigen::Matrix2d sub;
  sub << cov(i, i), cov(i, j), cov(j, i), cov(j, j);
  const auto pts = ellipse_points(sub);
  std::FILE* out = out_path.empty() ? stdout : std::fopen(out_path.c_str(), "w");
  if (out == nullptr) throw Error("cannot open " + out_path + " for writing");
  std::fprintf(out, "%s_%c,%s_%c\n", block.c_str(), "xyz"[i], block.c_str(),
               "xyz"[j]);
  for (const auto& p : pts)
    std::fprintf(out, "%.17g,%.17g\n", p.x(), p.y());
  if (!out_path.empty()) std::fclose(out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hand-eye calibration (AX = XB) with covariance estimation"};
  app.set_version_flag("--version", axxb::kToolVersion);
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic dataset");
  double lambda = 1e-5;
  int k = 30;
  std::uint64_t seed = 0;
  std::string out_path = "dataset.txt";
  std::string truth_path;
  sim->add_option("--lambda", lambda, "Noise scale (>= 0)")
      ->check(CLI::NonNegativeNumber);
  sim->add_option("--k", k, "Pairs per dataset")->check(CLI::PositiveNumber);
  sim->add_option("--seed", seed, "RNG seed");
  sim->add_option("--out", out_path, "Output dataset file");
  sim->add_option("--truth", truth_path, "Truth sidecar file");

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "Solve AX = XB with covariances");
  std::string dataset_path;
  std::string result_path = "result.txt";
  std::vector<double> cov_ra, cov_rb, cov_ta, cov_tb;
  cal->add_option("dataset", dataset_path, "Input dataset file")->required();
  cal->add_option("--out", result_path, "Output result file");
  cal->add_option("--assume-cov-ra", cov_ra,
                  "Shared rotation covariance of A (3 diag or 9 row-major)");
  cal->add_option("--assume-cov-rb", cov_rb,
                  "Shared rotation covariance of B");
  cal->add_option("--assume-cov-ta", cov_ta,
                  "Shared translation covariance of A");
  cal->add_option("--assume-cov-tb", cov_tb,
                  "Shared translation covariance of B");

  // validate
  auto* val = app.add_subcommand(
      "validate", "Compare predicted covariances against Monte-Carlo");
  std::vector<double> lambdas{1e-5};
  int M = 1000;
  int vk = 30;
  std::uint64_t vseed = 0;
  val->add_option("--lambda", lambdas, "Noise scale(s); repeat for a sweep");
  val->add_option("--k", vk, "Pairs per dataset")->check(CLI::PositiveNumber);
  val->add_option("--M", M, "Dataset count")->check(CLI::Range(2, 1000000));
  val->add_option("--seed", vseed, "RNG seed");

  // compound
  auto* comp =
      app.add_subcommand("compound", "Chain-propagate noisy pose files");
  std::vector<std::string> pose_paths;
  std::string comp_out = "compound.txt";
  bool mc_check = false;
  int mc_samples = 100000;
  std::uint64_t comp_seed = 0;
  comp->add_option("poses", pose_paths, "Pose files, left to right")
      ->required()
      ->expected(-1);
  comp->add_option("--out", comp_out, "Output pose file");
  comp->add_flag("--mc-check", mc_check,
                 "Cross-check the prediction by internal sampling");
  comp->add_option("--mc-samples", mc_samples, "Samples for --mc-check")
      ->check(CLI::PositiveNumber);
  comp->add_option("--seed", comp_seed, "RNG seed for --mc-check");

  // ellipse
  auto* ell = app.add_subcommand(
      "ellipse", "Emit a one-standard-deviation covariance ellipse as CSV");
  std::string ell_result;
  std::string ell_block = "rotation";
  std::string ell_axes = "xy";
  std::string ell_out;
  ell->add_option("result", ell_result, "Result file")->required();
  ell->add_option("--block", ell_block, "rotation or translation")
      ->check(CLI::IsMember({"rotation", "translation"}));
  ell->add_option("--axes", ell_axes, "Axis pair: xy, yz or xz")
      ->check(CLI::IsMember({"xy", "yz", "xz"}));
  ell->add_option("--out", ell_out, "Output CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (sim->parsed())
      return cmd_simulate(lambda, k, seed, out_path, truth_path);
    if (cal->parsed())
      return cmd_calibrate(dataset_path, result_path, cov_ra, cov_rb, cov_ta,
                           cov_tb);
    if (val->parsed()) return cmd_validate(lambdas, vk, M, vseed);
    if (comp->parsed())
      return cmd_compound(pose_paths, comp_out, mc_check, mc_samples,
                          comp_seed);
    if (ell->parsed())
      return cmd_ellipse(ell_result, ell_block, ell_axes, ell_out);
  } catch (const axxb::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
