#pragma once

#include <Eigen/Dense>

#include <limits>
#include <stdexcept>
#include <string>

namespace sbridge {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class ErrorKind {
  kInvalidInput,
  kNonConvergence,
  kInfeasible,
};

// All library failures are reported through this exception. Solver failures
// carry the iteration count and the last convergence measure reached.
class SolverError : public std::runtime_error {
 public:
  SolverError(ErrorKind kind, const std::string& message, int iterations = 0,
              double final_gap = kInf)
      : std::runtime_error(message),
        kind_(kind),
        iterations_(iterations),
        final_gap_(final_gap) {}

  ErrorKind kind() const noexcept { return kind_; }
  int iterations() const noexcept { return iterations_; }
  double final_gap() const noexcept { return final_gap_; }

 private:
  ErrorKind kind_;
  int iterations_;
  double final_gap_;
};

[[noreturn]] inline void invalid_input(const std::string& message) {
  throw SolverError(ErrorKind::kInvalidInput, message);
}

}  // namespace sbridge
