#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "sbridge/common.hpp"
#include "sbridge/marginal.hpp"
#include "sbridge/prior.hpp"

namespace sbridge {

struct SolverOptions {
  // Stop when the Hilbert distance between successive phihat0 iterates
  // drops below tol.
  double tol = 1e-12;
  int max_iter = 10000;
  // Consecutive non-improving iterations tolerated before the instance is
  // declared infeasible.
  int stall_window = 50;
  // Run the iteration on log-potentials even when the kernel is benign.
  bool force_log_domain = false;
};

// Potentials satisfy q0N(x0, xN) = phihat0(x0) K(x0, xN) phiN(xN) with
// K = p(0, .; N, .), phi0 = K phiN and phihatN = K^T phihat0.
struct BridgeSolution {
  Vector phi0;
  Vector phiN;
  Vector phihat0;
  Vector phihatN;
  Matrix q0N;
  Vector q0_star;
  Vector qN_star;
  int iterations = 0;
  double final_gap = 0.0;
  double kl_value = 0.0;
  // Hilbert gap after each cycle; empty for closed-form solutions.
  std::vector<double> gap_history;
  bool log_domain = false;
};

struct FlowEvolution {
  // Row t is the distribution at time t.
  Matrix marginals;
  // transitions[t](i, j) = P*(X_{t+1} = j | X_t = i).
  std::vector<Matrix> transitions;
  // edge_flows[t](i, j) = mass moving along (i, j) during (t, t+1).
  std::vector<Matrix> edge_flows;
};

// Initial marginal known (fully or on a subset); the prior kernel is kept and
// the unknown initial mass is the prior's, rescaled to the missing total.
BridgeSolution half_bridge_initial(const MarkovPrior& prior, const PartialMarginal& rho0);

// Final-marginal counterpart; keeps the prior's reverse-time kernel.
BridgeSolution half_bridge_final(const MarkovPrior& prior, const PartialMarginal& rhoN);

// Schroedinger bridge with (possibly incomplete) endpoint information. A
// missing side dispatches to the matching half-bridge; two full sides give
// the classical bridge.
BridgeSolution imsbp_solve(const MarkovPrior& prior,
                           const std::optional<PartialMarginal>& rho0,
                           const std::optional<PartialMarginal>& rhoN,
                           const SolverOptions& options = {});

// Time-varying Markov representation of the optimal path law.
FlowEvolution recover_flow(const MarkovPrior& prior, const BridgeSolution& sol);

// Row and column sums of q0N.
std::pair<Vector, Vector> complete_marginals(const BridgeSolution& sol);

// Relative entropy sum q log(q/p), 0 log 0 = 0, +inf unless supp q is in
// supp p. Works on vectors as n x 1 matrices.
double kl_divergence(const Matrix& q, const Matrix& p);

}  // namespace sbridge
