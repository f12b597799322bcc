#include "sbridge/prior.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sbridge {

namespace {

constexpr double kStochasticTol = 1e-12;

// Temperatures below this accumulate partition vectors in the log domain.
constexpr double kLogDomainTemperature = 0.05;

double log_sum_exp(const Vector& v) {
  const double m = v.maxCoeff();
  if (m == -kInf) return -kInf;
  return m + std::log((v.array() - m).exp().sum());
}

// Row used where a state carries no mass within the remaining horizon.
Eigen::RowVectorXd placeholder_row(const Graph& g, int i) {
  const int n = g.size();
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
  const auto succ = g.successors(i);
  if (succ.empty()) {
    row(i) = 1.0;
  } else {
    for (int j : succ) row(j) = 1.0 / static_cast<double>(succ.size());
  }
  return row;
}

}  // namespace

MarkovPrior::MarkovPrior(Vector p0, std::vector<Matrix> steps)
    : p0_(std::move(p0)), steps_(std::move(steps)) {
  const Eigen::Index n = p0_.size();
  if (n < 1) invalid_input("prior needs at least one state");
  if (steps_.empty()) invalid_input("prior horizon must be at least 1");
  if ((p0_.array() < 0.0).any() || !p0_.allFinite()) {
    invalid_input("initial distribution has negative or non-finite entries");
  }
  if (std::abs(p0_.sum() - 1.0) > kStochasticTol) {
    invalid_input("initial distribution does not sum to 1");
  }
  for (std::size_t t = 0; t < steps_.size(); ++t) {
    const Matrix& s = steps_[t];
    if (s.rows() != n || s.cols() != n) {
      invalid_input("transition matrix " + std::to_string(t) + " has wrong dimensions");
    }
    if ((s.array() < 0.0).any() || !s.allFinite()) {
      invalid_input("transition matrix " + std::to_string(t) + " has negative entries");
    }
    const Vector rows = s.rowwise().sum();
    if (((rows.array() - 1.0).abs() > kStochasticTol).any()) {
      invalid_input("transition matrix " + std::to_string(t) + " is not row-stochastic");
    }
  }
}

MarkovPrior boltzmann_prior(const Graph& g, double temperature, int horizon) {
  if (!(temperature > 0.0)) invalid_input("temperature must be positive");
  if (horizon < 1) invalid_input("horizon must be at least 1");
  const int n = g.size();

  // Every walk has exactly `horizon` edges, so shifting all lengths by the
  // same amount leaves the normalized measure unchanged.
  double shortest = kInf;
  for (const Edge& e : g.edges()) shortest = std::min(shortest, e.length);
  Matrix log_weight = Matrix::Constant(n, n, -kInf);
  for (const Edge& e : g.edges()) {
    log_weight(e.from, e.to) = -(e.length - shortest) / temperature;
  }

  // log_b[k](i) = log sum over walks with k edges from i of their weights.
  std::vector<Vector> log_b(static_cast<std::size_t>(horizon) + 1);
  log_b[0] = Vector::Zero(n);
  if (temperature < kLogDomainTemperature) {
    for (int k = 1; k <= horizon; ++k) {
      Vector next(n);
      for (int i = 0; i < n; ++i) {
        next(i) = log_sum_exp(log_weight.row(i).transpose() + log_b[k - 1]);
      }
      log_b[k] = std::move(next);
    }
  } else {
    const Matrix weight = log_weight.array().exp().matrix();
    Vector b = Vector::Ones(n);
    for (int k = 1; k <= horizon; ++k) {
      b = weight * b;
      log_b[k] = b.array().log().matrix();
    }
  }

  const double log_z = log_sum_exp(log_b[horizon]);
  if (log_z == -kInf) invalid_input("graph has no walk of the requested length");
  Vector p0 = (log_b[horizon].array() - log_z).exp().matrix();
  p0 /= p0.sum();

  std::vector<Matrix> steps;
  steps.reserve(static_cast<std::size_t>(horizon));
  for (int t = 0; t < horizon; ++t) {
    const Vector& here = log_b[horizon - t];
    const Vector& there = log_b[horizon - t - 1];
    Matrix step = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      if (here(i) == -kInf) {
        step.row(i) = placeholder_row(g, i);
        continue;
      }
      for (int j = 0; j < n; ++j) {
        if (log_weight(i, j) == -kInf || there(j) == -kInf) continue;
        step(i, j) = std::exp(log_weight(i, j) + there(j) - here(i));
      }
      step.row(i) /= step.row(i).sum();
    }
    steps.push_back(std::move(step));
  }
  return MarkovPrior(std::move(p0), std::move(steps));
}

MarkovPrior ruelle_bowen_prior(const Graph& g, int horizon) {
  if (horizon < 1) invalid_input("horizon must be at least 1");
  const PerronResult pf = perron(g);
  const int n = g.size();
  Vector nu = pf.left.cwiseProduct(pf.right);
  nu /= nu.sum();
  Matrix r = Matrix::Zero(n, n);
  for (const Edge& e : g.edges()) {
    r(e.from, e.to) = pf.right(e.to) / (pf.spectral_radius * pf.right(e.from));
  }
  // Rows sum to 1 up to the eigen-residual; remove that rounding.
  for (int i = 0; i < n; ++i) r.row(i) /= r.row(i).sum();
  return MarkovPrior(std::move(nu), std::vector<Matrix>(static_cast<std::size_t>(horizon), r));
}

MarkovPrior custom_markov_prior(Vector p0, std::vector<Matrix> steps) {
  return MarkovPrior(std::move(p0), std::move(steps));
}

Matrix n_step_kernel(const MarkovPrior& prior, int s, int t) {
  if (s < 0 || t > prior.horizon() || s >= t) {
    invalid_input("kernel times must satisfy 0 <= s < t <= N");
  }
  Matrix k = prior.step(s);
  for (int u = s + 1; u < t; ++u) k = k * prior.step(u);
  return k;
}

Vector marginal(const MarkovPrior& prior, int t) {
  if (t < 0 || t > prior.horizon()) invalid_input("time outside 0..N");
  Eigen::RowVectorXd p = prior.initial().transpose();
  for (int u = 0; u < t; ++u) p = p * prior.step(u);
  return p.transpose();
}

Matrix endpoint_joint(const MarkovPrior& prior) {
  return prior.initial().asDiagonal() * n_step_kernel(prior, 0, prior.horizon());
}

ReverseKernel reverse_kernel(const MarkovPrior& prior) {
  const int n = prior.size();
  const Matrix joint = endpoint_joint(prior);
  ReverseKernel out;
  out.final_marginal = joint.colwise().sum().transpose();
  out.kernel = Matrix::Zero(n, n);
  out.defined.assign(static_cast<std::size_t>(n), false);
  for (int xn = 0; xn < n; ++xn) {
    const double mass = out.final_marginal(xn);
    if (mass <= 0.0) continue;
    out.kernel.row(xn) = joint.col(xn).transpose() / mass;
    out.defined[static_cast<std::size_t>(xn)] = true;
  }
  return out;
}

Vector ReverseKernel::row(int final_state) const {
  if (final_state < 0 || final_state >= kernel.rows()) invalid_input("state out of range");
  if (!defined[static_cast<std::size_t>(final_state)]) {
    invalid_input("reverse kernel undefined where the final marginal is zero");
  }
  return kernel.row(final_state).transpose();
}

double path_probability(const MarkovPrior& prior, std::span<const int> path) {
  if (static_cast<int>(path.size()) != prior.horizon() + 1) {
    invalid_input("path must have N+1 states");
  }
  for (int x : path) {
    if (x < 0 || x >= prior.size()) invalid_input("path state out of range");
  }
  double p = prior.initial()(path[0]);
  for (int t = 0; t < prior.horizon() && p > 0.0; ++t) {
    p *= prior.step(t)(path[static_cast<std::size_t>(t)],
                       path[static_cast<std::size_t>(t) + 1]);
  }
  return p;
}

}  // namespace sbridge
