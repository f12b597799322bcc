#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sbridge/bridge.hpp"
#include "sbridge/common.hpp"
#include "sbridge/prior.hpp"

namespace sbridge {

struct SideMoments {
  double mean = 0.0;
  std::optional<double> second_moment;  // order 2 only
};

enum class Side { kInitial, kFinal };

struct MomentSpec {
  int order = 1;
  std::optional<SideMoments> initial;
  std::optional<SideMoments> final;
  // Numeric value of each state; defaults to the labels 1..n.
  std::optional<std::vector<double>> node_values;
};

// Multipliers of the tilt q0N = p0N exp(-1 - theta - lambda x0 - mu xN
// - alpha x0^2 - beta xN^2). Unconstrained features keep a zero multiplier.
struct DualState {
  double theta = 0.0;
  double lambda = 0.0;
  double mu = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double objective = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool capped = false;
  std::vector<std::string> warnings;
};

struct MomentOptions {
  double tol = 1e-10;
  int max_iter = 10000;
  double multiplier_cap = 500.0;
};

struct MomentSolution {
  Matrix q0N;
  DualState dual;
};

// Lagrangian at (theta, multipliers) evaluated at the tilted primal.
// gradient = (mass - 1, achieved - target for each constrained feature), with
// features ordered x0, xN, x0^2, xN^2 and skipped when not constrained.
struct DualEvaluation {
  double value = 0.0;
  Vector gradient;
  bool finite = true;
};

DualEvaluation dual_objective_and_gradient(const MarkovPrior& prior, const DualState& dual,
                                           const MomentSpec& spec);

// General entry point: any combination of sides and orders.
MomentSolution solve_moment_bridge(const MarkovPrior& prior, const MomentSpec& spec,
                                   const MomentOptions& options = {});

MomentSolution mean_bridge_dual_ascent(const MarkovPrior& prior, double m0, double mN,
                                       const MomentOptions& options = {});

MomentSolution mean_variance_bridge(const MarkovPrior& prior, const MomentSpec& spec,
                                    const MomentOptions& options = {});

MomentSolution half_bridge_moments(const MarkovPrior& prior, Side side,
                                   const MomentSpec& spec, const MomentOptions& options = {});

// Unique positive root of sum_k coeffs[k] r^k, whose coefficient signs change
// exactly once. Relative accuracy 1e-14.
double positive_root(std::span<const double> coeffs);

// Alternates lambda = log R_P(mu) and mu = log R_Phat(lambda) until the
// multipliers move less than options.tol. Node values are the labels 1..n.
MomentSolution mean_bridge_root_iteration(const MarkovPrior& prior, double m0, double mN,
                                          const MomentOptions& options = {});

// Schroedinger potentials of a moment solution, so it can feed recover_flow.
BridgeSolution moment_bridge_solution(const MarkovPrior& prior, const MomentSolution& sol,
                                      const MomentSpec& spec);

// Moments of the endpoint joint: (E x0, E xN, E x0^2, E xN^2).
Eigen::Vector4d endpoint_moments(const Matrix& q0N, const std::vector<double>& node_values);

std::vector<double> resolve_node_values(const MomentSpec& spec, int n);

}  // namespace sbridge
