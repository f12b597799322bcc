#pragma once

#include <span>
#include <vector>

#include "sbridge/common.hpp"
#include "sbridge/graph.hpp"

namespace sbridge {

// Path measure P(x_0..x_N) = p0(x_0) * prod_t steps[t](x_t, x_{t+1}).
class MarkovPrior {
 public:
  // Validates: p0 on the simplex, every step row-stochastic (1e-12).
  MarkovPrior(Vector p0, std::vector<Matrix> steps);

  int size() const { return static_cast<int>(p0_.size()); }
  int horizon() const { return static_cast<int>(steps_.size()); }
  const Vector& initial() const { return p0_; }
  const std::vector<Matrix>& steps() const { return steps_; }
  const Matrix& step(int t) const { return steps_.at(static_cast<std::size_t>(t)); }

 private:
  Vector p0_;
  std::vector<Matrix> steps_;
};

// Boltzmann path measure exp(-sum of edge lengths / T) / Z over the walks of
// length N, in Markov form via backward partition vectors M^k 1.
MarkovPrior boltzmann_prior(const Graph& g, double temperature, int horizon);

// Ruelle-Bowen measure: p0 = u.*v, stationary transitions v_j a_ij / (lambda v_i).
MarkovPrior ruelle_bowen_prior(const Graph& g, int horizon);

MarkovPrior custom_markov_prior(Vector p0, std::vector<Matrix> steps);

// Product steps[s] ... steps[t-1]; requires 0 <= s < t <= N.
Matrix n_step_kernel(const MarkovPrior& prior, int s, int t);

// Distribution of X_t.
Vector marginal(const MarkovPrior& prior, int t);

// Joint law of (X_0, X_N).
Matrix endpoint_joint(const MarkovPrior& prior);

// Reverse-time kernel P(X_0 = x0 | X_N = xN), indexed (xN, x0). Rows where the
// final marginal vanishes are left at zero and marked undefined.
struct ReverseKernel {
  Matrix kernel;
  std::vector<bool> defined;
  Vector final_marginal;

  // Throws kInvalidInput for an undefined row.
  Vector row(int final_state) const;
};

ReverseKernel reverse_kernel(const MarkovPrior& prior);

// Probability of a path with N+1 states; 0 for infeasible paths.
double path_probability(const MarkovPrior& prior, std::span<const int> path);

}  // namespace sbridge
