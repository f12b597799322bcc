#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace sbridge::cli {

enum ExitCode { kOk = 0, kIoFailure = 1, kNonConvergence = 2, kInfeasible = 3 };

struct RunConfig {
  std::string graph_path;
  std::string prior_path;
  std::optional<std::string> marginals_path;
  std::optional<std::string> moments_path;
  // Bridge default 1e-12 (Hilbert gap), moment default 1e-10 (dual gradient).
  std::optional<double> tol;
  std::optional<int> max_iter;
  std::string output_dir = ".";
  std::vector<std::string> formats = {"csv", "json", "dot"};
};

int cmd_solve(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_verify(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_prior_info(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace sbridge::cli
