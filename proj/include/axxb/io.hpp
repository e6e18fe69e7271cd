#pragma once

// Line-delimited text serialization for datasets, results and poses.
// Decimals are written with 17 significant digits so write/read round-trips
// are bit-exact.

#include <Eigen/Dense>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "axxb/errors.hpp"
#include "axxb/noise.hpp"

namespace axxb {

inline constexpr const char* kToolVersion = "axxb 1.0.0";

namespace io_detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename Derived>
std::string fmt_row_major(const Eigen::MatrixBase<Derived>& m) {
  std::string out;
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) {
      if (!out.empty()) out += ' ';
      out += fmt(m(r, c));
    }
  return out;
}

class LineReader {
 public:
  explicit LineReader(const std::string& path) : path_(path), in_(path) {
    if (!in_) throw ParseError(path + ": cannot open file");
  }

  // Next meaningful line without consuming it; empty when at EOF.
  const std::string* peek() {
    if (!has_pending_) {
      std::string line;
      while (std::getline(in_, line)) {
        ++line_no_;
        const auto pos = line.find_first_not_of(" \t\r");
        if (pos == std::string::npos || line[pos] == '#') continue;
        pending_ = line;
        has_pending_ = true;
        break;
      }
    }
    return has_pending_ ? &pending_ : nullptr;
  }

  // Next meaningful line; throws at EOF.
  std::string next() {
    if (peek() == nullptr)
      throw ParseError(path_ + ":" + std::to_string(line_no_) +
                       ": unexpected end of file");
    has_pending_ = false;
    return std::move(pending_);
  }

  std::string where() const {
    return path_ + ":" + std::to_string(line_no_);
  }

 private:
  std::string path_;
  std::ifstream in_;
  int line_no_ = 0;
  std::string pending_;
  bool has_pending_ = false;
};

inline std::vector<double> parse_values(LineReader& rd, const std::string& line,
                                        const std::string& key, int count) {
  std::istringstream ss(line);
  std::string found;
  ss >> found;
  if (found != key)
    throw ParseError(rd.where() + ": expected '" + key + "', found '" + found +
                     "'");
  std::vector<double> vals(count);
  for (int i = 0; i < count; ++i)
    if (!(ss >> vals[i]))
      throw ParseError(rd.where() + ": expected " + std::to_string(count) +
                       " values after '" + key + "'");
  return vals;
}

inline std::vector<double> expect_values(LineReader& rd, const std::string& key,
                                         int count) {
  return parse_values(rd, rd.next(), key, count);
}

inline Mat3 to_mat3(const std::vector<double>& v) {
  Mat3 m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = v[3 * r + c];
  return m;
}

inline Vec3 to_vec3(const std::vector<double>& v) {
  return Vec3(v[0], v[1], v[2]);
}

inline void expect_header(LineReader& rd, const std::string& magic) {
  std::istringstream ss(rd.next());
  std::string found, version;
  ss >> found >> version;
  if (found != magic)
    throw ParseError(rd.where() + ": expected header '" + magic + "'");
  if (version != "1")
    throw ParseError(rd.where() + ": unsupported schema version '" + version +
                     "'");
}

}  // namespace io_detail

// FNV-1a over the raw file bytes, recorded as provenance in result files.
inline std::uint64_t file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path + ": cannot open file");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char c;
  while (in.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct ResultFile {
  DecoupledPose X;
  Mat3 cov_R = Mat3::Zero();
  Mat3 cov_t = Mat3::Zero();
  int iterations_rot = 0;
  int iterations_trans = 0;
  double residual_rot = 0.0;
  double residual_trans = 0.0;
  std::uint64_t input_hash = 0;
  std::uint64_t seed = 0;
  std::string tool_version = kToolVersion;
};

struct TruthFile {
  DecoupledPose X;
  Mat3 cov_RA = Mat3::Zero();
  Mat3 cov_RB = Mat3::Zero();
  Mat3 cov_tA = Mat3::Zero();
  Mat3 cov_tB = Mat3::Zero();
};

inline void write_dataset(const std::string& path, const MeasurementSet& set,
                          bool with_covariances = true) {
  std::ofstream out(path);
  if (!out) throw ParseError(path + ": cannot open for writing");
  out << "axxb_dataset 1\n";
  out << "pairs " << set.size() << "\n";
  for (std::size_t i = 0; i < set.size(); ++i) {
    const MeasurementPair& p = set[i];
    out << "pair " << i << "\n";
    out << "A_R " << io_detail::fmt_row_major(p.A.R) << "\n";
    out << "A_t " << io_detail::fmt_row_major(p.A.t.transpose()) << "\n";
    out << "B_R " << io_detail::fmt_row_major(p.B.R) << "\n";
    out << "B_t " << io_detail::fmt_row_major(p.B.t.transpose()) << "\n";
    if (with_covariances) {
      out << "cov_RA " << io_detail::fmt_row_major(p.A.cov_R) << "\n";
      out << "cov_RB " << io_detail::fmt_row_major(p.B.cov_R) << "\n";
      out << "cov_tA " << io_detail::fmt_row_major(p.A.cov_t) << "\n";
      out << "cov_tB " << io_detail::fmt_row_major(p.B.cov_t) << "\n";
    }
  }
}

// Reads and validates a dataset. Rotation blocks within the 1e-6 repair
// window are re-orthonormalized; covariances must be PSD when present.
inline MeasurementSet read_dataset(const std::string& path) {
  using namespace io_detail;
  LineReader rd(path);
  expect_header(rd, "axxb_dataset");
  const auto n = expect_values(rd, "pairs", 1)[0];
  if (n < 0 || n != std::floor(n))
    throw ParseError(rd.where() + ": invalid pair count");
  MeasurementSet set(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < set.size(); ++i) {
    expect_values(rd, "pair", 1);
    MeasurementPair& p = set[i];
    try {
      p.A.R = validate_rotation(to_mat3(expect_values(rd, "A_R", 9)));
      p.A.t = to_vec3(expect_values(rd, "A_t", 3));
      p.B.R = validate_rotation(to_mat3(expect_values(rd, "B_R", 9)));
      p.B.t = to_vec3(expect_values(rd, "B_t", 3));
    } catch (const InvalidRotationError& e) {
      throw ParseError(rd.where() + ": " + e.what());
    }
    const std::string* ahead = rd.peek();
    if (ahead != nullptr && ahead->rfind("cov_RA", 0) == 0) {
      p.A.cov_R = to_mat3(expect_values(rd, "cov_RA", 9));
      p.B.cov_R = to_mat3(expect_values(rd, "cov_RB", 9));
      p.A.cov_t = to_mat3(expect_values(rd, "cov_tA", 9));
      p.B.cov_t = to_mat3(expect_values(rd, "cov_tB", 9));
      try {
        validate_cov(p.A.cov_R);
        validate_cov(p.B.cov_R);
        validate_cov(p.A.cov_t);
        validate_cov(p.B.cov_t);
      } catch (const NonPsdError& e) {
        throw ParseError(rd.where() + ": " + e.what());
      }
    }
  }
  return set;
}

inline void write_result(const std::string& path, const ResultFile& res) {
  std::ofstream out(path);
  if (!out) throw ParseError(path + ": cannot open for writing");
  out << "axxb_result 1\n";
  out << "R " << io_detail::fmt_row_major(res.X.R) << "\n";
  out << "t " << io_detail::fmt_row_major(res.X.t.transpose()) << "\n";
  out << "cov_R " << io_detail::fmt_row_major(res.cov_R) << "\n";
  out << "cov_t " << io_detail::fmt_row_major(res.cov_t) << "\n";
  out << "iterations " << res.iterations_rot << " " << res.iterations_trans
      << "\n";
  out << "residuals " << io_detail::fmt(res.residual_rot) << " "
      << io_detail::fmt(res.residual_trans) << "\n";
  out << "input_hash " << res.input_hash << "\n";
  out << "seed " << res.seed << "\n";
  out << "tool_version " << res.tool_version << "\n";
}

inline ResultFile read_result(const std::string& path) {
  using namespace io_detail;
  LineReader rd(path);
  expect_header(rd, "axxb_result");
  ResultFile res;
  res.X.R = validate_rotation(to_mat3(expect_values(rd, "R", 9)));
  res.X.t = to_vec3(expect_values(rd, "t", 3));
  res.cov_R = to_mat3(expect_values(rd, "cov_R", 9));
  res.cov_t = to_mat3(expect_values(rd, "cov_t", 9));
  try {
    validate_cov(res.cov_R);
    validate_cov(res.cov_t);
  } catch (const NonPsdError& e) {
    throw ParseError(rd.where() + ": " + e.what());
  }
  auto iters = expect_values(rd, "iterations", 2);
  res.iterations_rot = static_cast<int>(iters[0]);
  res.iterations_trans = static_cast<int>(iters[1]);
  auto resid = expect_values(rd, "residuals", 2);
  res.residual_rot = resid[0];
  res.residual_trans = resid[1];
  res.input_hash =
      static_cast<std::uint64_t>(expect_values(rd, "input_hash", 1)[0]);
  res.seed = static_cast<std::uint64_t>(expect_values(rd, "seed", 1)[0]);
  std::istringstream ss(rd.next());
  std::string key;
  ss >> key;
  if (key != "tool_version")
    throw ParseError(rd.where() + ": expected 'tool_version'");
  std::getline(ss, res.tool_version);
  const auto pos = res.tool_version.find_first_not_of(' ');
  if (pos != std::string::npos) res.tool_version = res.tool_version.substr(pos);
  return res;
}

inline void write_pose(const std::string& path, const NoisyPose& pose) {
  std::ofstream out(path);
  if (!out) throw ParseError(path + ": cannot open for writing");
  out << "axxb_pose 1\n";
  out << "R " << io_detail::fmt_row_major(pose.R) << "\n";
  out << "t " << io_detail::fmt_row_major(pose.t.transpose()) << "\n";
  out << "cov_R " << io_detail::fmt_row_major(pose.cov_R) << "\n";
  out << "cov_t " << io_detail::fmt_row_major(pose.cov_t) << "\n";
}

inline NoisyPose read_pose(const std::string& path) {
  using namespace io_detail;
  LineReader rd(path);
  expect_header(rd, "axxb_pose");
  NoisyPose pose;
  pose.R = validate_rotation(to_mat3(expect_values(rd, "R", 9)));
  pose.t = to_vec3(expect_values(rd, "t", 3));
  pose.cov_R = to_mat3(expect_values(rd, "cov_R", 9));
  pose.cov_t = to_mat3(expect_values(rd, "cov_t", 9));
  try {
    validate_cov(pose.cov_R);
    validate_cov(pose.cov_t);
  } catch (const NonPsdError& e) {
    throw ParseError(rd.where() + ": " + e.what());
  }
  return pose;
}

inline void write_truth(const std::string& path, const TruthFile& truth) {
  std::ofstream out(path);
  if (!out) throw ParseError(path + ": cannot open for writing");
  out << "axxb_truth 1\n";
  out << "R " << io_detail::fmt_row_major(truth.X.R) << "\n";
  out << "t " << io_detail::fmt_row_major(truth.X.t.transpose()) << "\n";
  out << "cov_RA " << io_detail::fmt_row_major(truth.cov_RA) << "\n";
  out << "cov_RB " << io_detail::fmt_row_major(truth.cov_RB) << "\n";
  out << "cov_tA " << io_detail::fmt_row_major(truth.cov_tA) << "\n";
  out << "cov_tB " << io_detail::fmt_row_major(truth.cov_tB) << "\n";
}

inline TruthFile read_truth(const std::string& path) {
  using namespace io_detail;
  LineReader rd(path);
  expect_header(rd, "axxb_truth");
  TruthFile truth;
  truth.X.R = validate_rotation(to_mat3(expect_values(rd, "R", 9)));
  truth.X.t = to_vec3(expect_values(rd, "t", 3));
  truth.cov_RA = to_mat3(expect_values(rd, "cov_RA", 9));
  truth.cov_RB = to_mat3(expect_values(rd, "cov_RB", 9));
  truth.cov_tA = to_mat3(expect_values(rd, "cov_tA", 9));
  truth.cov_tB = to_mat3(expect_values(rd, "cov_tB", 9));
  return truth;
}

// One-standard-deviation ellipse of a 2x2 covariance sub-block, sampled at
// n points: V diag(sqrt(lambda)) [cos, sin].
inline std::vector<Eigen::Vector2d> ellipse_points(const Eigen::Matrix2d& cov,
                                                   int n = 360) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  if (eig.eigenvalues().minCoeff() < -1e-12)
    throw NonPsdError("ellipse_points: sub-block is not PSD");
  const Eigen::Vector2d scale =
      eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  std::vector<Eigen::Vector2d> pts(n);
  for (int i = 0; i < n; ++i) {
    const double th = 2.0 * std::numbers::pi * i / n;
    pts[i] = eig.eigenvectors() *
             Eigen::Vector2d(scale(0) * std::cos(th), scale(1) * std::sin(th));
  }
  return pts;
}

}  // namespace axxb
