#pragma once

#include <stdexcept>
#include <string>

namespace axxb {

// Process exit codes used by the CLI; library errors map onto them.
enum class ExitCode : int {
  Success = 0,
  Usage = 2,
  Validation = 3,
  DegenerateGeometry = 4,
  NoConvergence = 5,
};

class Error : public std::runtime_error {
 public:
  Error(std::string msg, ExitCode code = ExitCode::Validation)
      : std::runtime_error(std::move(msg)), code_(code) {}
  ExitCode exit_code() const { return code_; }

 private:
  ExitCode code_;
};

struct NonSkewError : Error {
  explicit NonSkewError(const std::string& msg) : Error(msg) {}
};

struct NonPsdError : Error {
  explicit NonPsdError(const std::string& msg) : Error(msg) {}
};

struct DimensionMismatchError : Error {
  explicit DimensionMismatchError(const std::string& msg) : Error(msg) {}
};

struct NearSingularError : Error {
  explicit NearSingularError(const std::string& msg) : Error(msg) {}
};

struct RankDeficientError : Error {
  explicit RankDeficientError(const std::string& msg)
      : Error(msg, ExitCode::DegenerateGeometry) {}
};

struct SingularBlockError : Error {
  explicit SingularBlockError(const std::string& msg)
      : Error(msg, ExitCode::DegenerateGeometry) {}
};

struct DegenerateMotionError : Error {
  explicit DegenerateMotionError(const std::string& msg)
      : Error(msg, ExitCode::DegenerateGeometry) {}
};

struct NoConvergenceError : Error {
  explicit NoConvergenceError(const std::string& msg)
      : Error(msg, ExitCode::NoConvergence) {}
};

struct LogBranchAmbiguityError : Error {
  explicit LogBranchAmbiguityError(const std::string& msg) : Error(msg) {}
};

struct DivisionByZeroError : Error {
  explicit DivisionByZeroError(const std::string& msg) : Error(msg) {}
};

struct ParseError : Error {
  explicit ParseError(const std::string& msg) : Error(msg) {}
};

struct InvalidRotationError : Error {
  explicit InvalidRotationError(const std::string& msg) : Error(msg) {}
};

}  // namespace axxb
