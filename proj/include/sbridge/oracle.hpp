#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "sbridge/common.hpp"
#include "sbridge/graph.hpp"
#include "sbridge/marginal.hpp"
#include "sbridge/moments.hpp"
#include "sbridge/prior.hpp"

namespace sbridge {

// sum_ij coefficients(i, j) q(i, j) = rhs
struct LinearConstraint {
  Matrix coefficients;
  double rhs = 0.0;
};

struct OracleResult {
  Matrix q;
  double kl = 0.0;
  // max |A q - b| over all constraints including normalization.
  double residual = 0.0;
  // Norm of the Lagrangian gradient on the free variables.
  double stationarity = 0.0;
  int iterations = 0;
};

// Minimizes sum q log(q / p0N) over the simplex subject to the constraints by
// a KKT Newton method on supp(p0N). Normalization is always imposed. Meant
// for tiny instances (n^2 <= 400); throws kInfeasible when the constraints
// cannot be met.
OracleResult brute_force_bridge(const Matrix& p0N, const std::vector<LinearConstraint>& constraints);

// Row-sum constraints on the initial subset, column-sum constraints on the
// final subset.
std::vector<LinearConstraint> marginal_constraints(int n,
                                                   const std::optional<PartialMarginal>& rho0,
                                                   const std::optional<PartialMarginal>& rhoN);

std::vector<LinearConstraint> moment_constraints(int n, const MomentSpec& spec);

struct PathLaw {
  std::vector<Path> paths;
  std::vector<double> probabilities;
};

// Every path of positive prior probability, optionally conditioned on its
// endpoints. Paths are listed in lexicographic order. Requires
// n^(N+1) <= 1e6.
PathLaw brute_force_paths(const MarkovPrior& prior,
                          const std::optional<std::pair<int, int>>& endpoints = std::nullopt);

}  // namespace sbridge
