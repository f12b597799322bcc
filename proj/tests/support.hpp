#pragma once

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sbridge/bridge.hpp"
#include "sbridge/graph.hpp"
#include "sbridge/io.hpp"
#include "sbridge/marginal.hpp"
#include "sbridge/prior.hpp"

namespace sbtest {

using namespace sbridge;

inline std::string fixture(const std::string& name) { return std::string(SBRIDGE_FIXTURES) + "/" + name; }

inline Graph figure3_graph() { return io::load_graph(fixture("figure3_graph.json")); }
inline Graph figure5_graph() { return io::load_graph(fixture("figure5_graph.json")); }

inline PartialMarginal figure3_initial() { return PartialMarginal::on_subset(9, {0, 1}, {0.5, 0.2}); }
inline PartialMarginal figure3_final() { return PartialMarginal::on_subset(9, {7, 8}, {0.3, 0.3}); }

// Directed ring 0 -> 1 -> ... -> 0 plus random extra edges and lengths.
inline Graph random_strong_graph(std::mt19937& rng, int n, double extra = 0.5) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_real_distribution<double> len(0.5, 2.0);
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (j == (i + 1) % n || u(rng) < extra) edges.push_back({i, j, len(rng)});
    }
  }
  return build_graph(n, edges);
}

// Random Markov prior whose steps are supported on the edges of g.
inline MarkovPrior random_prior(std::mt19937& rng, const Graph& g, int horizon) {
  std::uniform_real_distribution<double> u(0.1, 1.0);
  const int n = g.size();
  Vector p0(n);
  for (int i = 0; i < n; ++i) p0(i) = u(rng);
  p0 /= p0.sum();
  std::vector<Matrix> steps;
  for (int t = 0; t < horizon; ++t) {
    Matrix s = Matrix::Zero(n, n);
    for (const Edge& e : g.edges()) s(e.from, e.to) = u(rng);
    for (int i = 0; i < n; ++i) s.row(i) /= s.row(i).sum();
    steps.push_back(s);
  }
  return MarkovPrior(p0, steps);
}

// Random joint supported where p is, strictly positive there.
inline Matrix random_joint_like(std::mt19937& rng, const Matrix& p) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Matrix q = Matrix::Zero(p.rows(), p.cols());
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    if (p(k) > 0.0) q(k) = u(rng);
  }
  return q / q.sum();
}

// Nonempty proper subset of 0..n-1 chosen uniformly.
inline std::vector<int> random_proper_subset(std::mt19937& rng, int n) {
  std::uniform_int_distribution<int> pick(1, (1 << n) - 2);
  const int mask = pick(rng);
  std::vector<int> s;
  for (int i = 0; i < n; ++i) {
    if (mask & (1 << i)) s.push_back(i);
  }
  return s;
}

// Partial marginal on `nodes` read off a distribution.
inline PartialMarginal restrict_to(const Vector& dist, const std::vector<int>& nodes) {
  std::vector<double> v;
  for (int x : nodes) v.push_back(dist(x));
  return PartialMarginal::on_subset(static_cast<int>(dist.size()), nodes, v);
}

inline double max_abs(const Matrix& a) { return a.cwiseAbs().maxCoeff(); }

// Largest |log r(i,j) - log r(i,l) - log r(k,j) + log r(k,l)| over positive
// entries of r = q / p; zero when r is rank one on the support.
inline double log_minor_defect(const Matrix& q, const Matrix& p) {
  double worst = 0.0;
  const auto n = q.rows();
  const auto m = q.cols();
  auto lr = [&](Eigen::Index i, Eigen::Index j) { return std::log(q(i, j) / p(i, j)); };
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = i + 1; k < n; ++k)
      for (Eigen::Index j = 0; j < m; ++j)
        for (Eigen::Index l = j + 1; l < m; ++l) {
          if (q(i, j) > 0 && q(i, l) > 0 && q(k, j) > 0 && q(k, l) > 0 && p(i, j) > 0 && p(i, l) > 0 &&
              p(k, j) > 0 && p(k, l) > 0) {
            worst = std::max(worst, std::abs(lr(i, j) - lr(i, l) - lr(k, j) + lr(k, l)));
          }
        }
  return worst;
}

}  // namespace sbtest
