#include "sbridge/bridge.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sbridge/hilbert.hpp"

namespace sbridge {

namespace {

// Kernel entries below this switch the iteration to log-potentials.
constexpr double kLogDomainThreshold = 1e-250;

void check_dimensions(const MarkovPrior& prior, const PartialMarginal& m) {
  if (m.state_count() != prior.size()) {
    invalid_input("marginal has " + std::to_string(m.state_count()) +
                  " states, prior has " + std::to_string(prior.size()));
  }
}

// A constraint placing mass where the prior has none cannot be met with
// finite relative entropy.
void check_support(const PartialMarginal& m, const Vector& prior_marginal,
                   const char* side) {
  for (int x : m.nodes()) {
    if (m.value(x) > 0.0 && !(prior_marginal(x) > 0.0)) {
      throw SolverError(ErrorKind::kInfeasible,
                        std::string(side) + " marginal puts mass on node " +
                            std::to_string(x + 1) + " which the prior never visits");
    }
  }
}

double log_sum_exp(const Vector& v) {
  const double m = v.maxCoeff();
  if (m == -kInf) return -kInf;
  return m + std::log((v.array() - m).exp().sum());
}

// Arithmetic on potentials stored as plain values.
struct LinearDomain {
  Matrix kernel;

  Vector lift(const Vector& v) const { return v; }
  Vector lower(const Vector& v) const { return v; }
  double lift(double v) const { return v; }
  static constexpr double zero() { return 0.0; }
  static constexpr double one() { return 1.0; }
  static bool is_zero(double v) { return !(v > 0.0); }
  double quotient(double a, double b) const { return a / b; }
  double product(double a, double b) const { return a * b; }
  Vector push(const Vector& h0) const { return kernel.transpose() * h0; }
  Vector pull(const Vector& phiN) const { return kernel * phiN; }
  double masked_dot(const std::vector<bool>& mask, const Vector& a, const Vector& b) const {
    double s = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      if (mask[static_cast<std::size_t>(i)]) s += a(i) * b(i);
    }
    return s;
  }
  double distance(const Vector& a, const Vector& b) const { return hilbert_distance(a, b); }
};

// Arithmetic on log-potentials, for kernels that underflow.
struct LogDomain {
  Matrix log_kernel;

  Vector lift(const Vector& v) const { return v.array().log().matrix(); }
  Vector lower(const Vector& v) const { return v.array().exp().matrix(); }
  double lift(double v) const { return std::log(v); }
  static constexpr double zero() { return -kInf; }
  static constexpr double one() { return 0.0; }
  static bool is_zero(double v) { return v == -kInf; }
  double quotient(double a, double b) const { return a - b; }
  double product(double a, double b) const { return a + b; }
  Vector push(const Vector& h0) const {
    Vector out(h0.size());
    for (Eigen::Index y = 0; y < h0.size(); ++y) out(y) = log_sum_exp(log_kernel.col(y) + h0);
    return out;
  }
  Vector pull(const Vector& phiN) const {
    Vector out(phiN.size());
    for (Eigen::Index x = 0; x < phiN.size(); ++x) {
      out(x) = log_sum_exp(log_kernel.row(x).transpose() + phiN);
    }
    return out;
  }
  double masked_dot(const std::vector<bool>& mask, const Vector& a, const Vector& b) const {
    Vector terms = Vector::Constant(a.size(), -kInf);
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      if (mask[static_cast<std::size_t>(i)]) terms(i) = a(i) + b(i);
    }
    return log_sum_exp(terms);
  }
  double distance(const Vector& a, const Vector& b) const { return hilbert_distance_log(a, b); }
};

struct Potentials {
  Vector phihat0;
  Vector phihatN;
  Vector phiN;
  Vector phi0;
};

// One pass of the four maps starting from phihat0, stopping at phi0.
template <class Domain>
Potentials forward_half(const Domain& d, const Vector& phihat0, const PartialMarginal& rhoN,
                        const Vector& log_or_lin_rhoN) {
  Potentials p;
  p.phihat0 = phihat0;
  p.phihatN = d.push(phihat0);
  const int n = static_cast<int>(phihat0.size());
  p.phiN = Vector::Constant(n, Domain::one());
  for (int x : rhoN.nodes()) {
    if (rhoN.value(x) == 0.0) {
      p.phiN(x) = Domain::zero();
    } else if (Domain::is_zero(p.phihatN(x))) {
      throw SolverError(ErrorKind::kInfeasible,
                        "no prior path reaches final node " + std::to_string(x + 1));
    } else {
      p.phiN(x) = d.quotient(log_or_lin_rhoN(x), p.phihatN(x));
    }
  }
  p.phi0 = d.pull(p.phiN);
  return p;
}

template <class Domain>
BridgeSolution run_iteration(const Domain& d, const MarkovPrior& prior,
                             const PartialMarginal& rho0, const PartialMarginal& rhoN,
                             const SolverOptions& options) {
  const int n = prior.size();
  const Vector p0 = d.lift(prior.initial());
  const Vector rho0_d = d.lift(rho0.dense());
  const Vector rhoN_d = d.lift(rhoN.dense());
  std::vector<bool> complement(static_cast<std::size_t>(n));
  for (int x = 0; x < n; ++x) complement[static_cast<std::size_t>(x)] = !rho0.contains(x);
  const double missing = 1.0 - rho0.mass();

  BridgeSolution sol;
  Vector phihat0 = p0;
  double best = kInf;
  int stalled = 0;
  bool converged = false;
  for (int it = 1; it <= options.max_iter; ++it) {
    const Potentials p = forward_half(d, phihat0, rhoN, rhoN_d);

    Vector next = Vector::Constant(n, Domain::zero());
    for (int x : rho0.nodes()) {
      if (rho0.value(x) == 0.0) continue;
      if (Domain::is_zero(p.phi0(x))) {
        throw SolverError(ErrorKind::kInfeasible,
                          "no prior path leaves initial node " + std::to_string(x + 1) +
                              " towards the constrained final nodes",
                          it);
      }
      next(x) = d.quotient(rho0_d(x), p.phi0(x));
    }
    if (!rho0.is_full()) {
      const double weight = d.masked_dot(complement, p0, p.phi0);
      if (Domain::is_zero(weight)) {
        throw SolverError(ErrorKind::kInfeasible,
                          "no prior mass left outside the initial subset", it);
      }
      const double c0 = d.quotient(d.lift(missing), weight);
      for (int x = 0; x < n; ++x) {
        if (complement[static_cast<std::size_t>(x)]) next(x) = d.product(c0, p0(x));
      }
    }

    const double gap = d.distance(next, phihat0);
    phihat0 = std::move(next);
    sol.gap_history.push_back(gap);
    sol.iterations = it;
    sol.final_gap = gap;
    if (gap < options.tol) {
      converged = true;
      break;
    }
    if (gap < best) {
      best = gap;
      stalled = 0;
    } else if (++stalled >= options.stall_window) {
      throw SolverError(ErrorKind::kInfeasible,
                        "Hilbert gap stopped decreasing; constraints look infeasible "
                        "for this kernel support",
                        it, gap);
    }
  }
  if (!converged) {
    throw SolverError(ErrorKind::kNonConvergence,
                      "bridge iteration hit max_iter before reaching tol",
                      sol.iterations, sol.final_gap);
  }

  Potentials p = forward_half(d, phihat0, rhoN, rhoN_d);
  // Normalization sum phihat0 * phi0 = 1.
  std::vector<bool> all(static_cast<std::size_t>(n), true);
  const double total = d.masked_dot(all, p.phihat0, p.phi0);
  for (int x = 0; x < n; ++x) {
    p.phihat0(x) = d.quotient(p.phihat0(x), total);
    p.phihatN(x) = d.quotient(p.phihatN(x), total);
  }
  // With no free final node the gauge is not pinned by phiN = 1; fix it at
  // the most likely prior final state that carries potential.
  if (rhoN.is_full()) {
    const Vector pN = marginal(prior, prior.horizon());
    int anchor = -1;
    for (int x = 0; x < n; ++x) {
      if (Domain::is_zero(p.phiN(x))) continue;
      if (anchor < 0 || pN(x) > pN(anchor)) anchor = x;
    }
    const double s = p.phiN(anchor);
    for (int x = 0; x < n; ++x) {
      p.phiN(x) = d.quotient(p.phiN(x), s);
      p.phi0(x) = d.quotient(p.phi0(x), s);
      p.phihat0(x) = d.product(p.phihat0(x), s);
      p.phihatN(x) = d.product(p.phihatN(x), s);
    }
  }

  sol.phihat0 = d.lower(p.phihat0);
  sol.phihatN = d.lower(p.phihatN);
  sol.phiN = d.lower(p.phiN);
  sol.phi0 = d.lower(p.phi0);
  const Matrix kernel = n_step_kernel(prior, 0, prior.horizon());
  if constexpr (std::is_same_v<Domain, LogDomain>) {
    sol.q0N = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double l = p.phihat0(i) + d.log_kernel(i, j) + p.phiN(j);
        sol.q0N(i, j) = l == -kInf ? 0.0 : std::exp(l);
      }
    }
  } else {
    sol.q0N = sol.phihat0.asDiagonal() * kernel * sol.phiN.asDiagonal();
  }
  return sol;
}

void finish(BridgeSolution& sol, const MarkovPrior& prior) {
  sol.q0_star = sol.q0N.rowwise().sum();
  sol.qN_star = sol.q0N.colwise().sum().transpose();
  sol.kl_value = kl_divergence(sol.q0N, endpoint_joint(prior));
}

}  // namespace

BridgeSolution half_bridge_initial(const MarkovPrior& prior, const PartialMarginal& rho0) {
  check_dimensions(prior, rho0);
  const Vector& p0 = prior.initial();
  check_support(rho0, p0, "initial");
  const int n = prior.size();

  Vector q0 = rho0.dense();
  if (!rho0.is_full()) {
    double rest = 0.0;
    for (int x = 0; x < n; ++x) {
      if (!rho0.contains(x)) rest += p0(x);
    }
    if (!(rest > 0.0)) {
      throw SolverError(ErrorKind::kInfeasible,
                        "prior puts no mass outside the initial subset");
    }
    const double c0 = (1.0 - rho0.mass()) / rest;
    for (int x = 0; x < n; ++x) {
      if (!rho0.contains(x)) q0(x) = c0 * p0(x);
    }
  }

  const Matrix kernel = n_step_kernel(prior, 0, prior.horizon());
  BridgeSolution sol;
  sol.phiN = Vector::Ones(n);
  sol.phi0 = kernel * sol.phiN;
  sol.phihat0 = q0;
  sol.phihatN = kernel.transpose() * q0;
  sol.q0N = q0.asDiagonal() * kernel;
  finish(sol, prior);
  sol.q0_star = q0;
  return sol;
}

BridgeSolution half_bridge_final(const MarkovPrior& prior, const PartialMarginal& rhoN) {
  check_dimensions(prior, rhoN);
  const int n = prior.size();
  const Vector pN = marginal(prior, prior.horizon());
  check_support(rhoN, pN, "final");

  double cN = 0.0;
  if (!rhoN.is_full()) {
    double rest = 0.0;
    for (int x = 0; x < n; ++x) {
      if (!rhoN.contains(x)) rest += pN(x);
    }
    if (!(rest > 0.0)) {
      throw SolverError(ErrorKind::kInfeasible, "prior puts no mass outside the final subset");
    }
    cN = (1.0 - rhoN.mass()) / rest;
  }

  // phiN = qN* / pN: rho/pN on the subset, the constant cN elsewhere.
  Vector phiN(n);
  for (int x = 0; x < n; ++x) {
    if (rhoN.contains(x)) {
      phiN(x) = rhoN.value(x) > 0.0 ? rhoN.value(x) / pN(x) : 0.0;
    } else {
      phiN(x) = cN;
    }
  }

  const Matrix kernel = n_step_kernel(prior, 0, prior.horizon());
  BridgeSolution sol;
  sol.phiN = phiN;
  sol.phi0 = kernel * phiN;
  sol.phihat0 = prior.initial();
  sol.phihatN = kernel.transpose() * prior.initial();
  sol.q0N = prior.initial().asDiagonal() * kernel * phiN.asDiagonal();
  finish(sol, prior);
  return sol;
}

BridgeSolution imsbp_solve(const MarkovPrior& prior, const std::optional<PartialMarginal>& rho0,
                           const std::optional<PartialMarginal>& rhoN,
                           const SolverOptions& options) {
  if (!rho0 && !rhoN) invalid_input("bridge needs at least one marginal constraint");
  if (!rhoN) return half_bridge_initial(prior, *rho0);
  if (!rho0) return half_bridge_final(prior, *rhoN);
  if (!(options.tol > 0.0)) invalid_input("tolerance must be positive");
  if (options.max_iter < 1) invalid_input("max_iter must be positive");
  check_dimensions(prior, *rho0);
  check_dimensions(prior, *rhoN);
  check_support(*rho0, prior.initial(), "initial");
  check_support(*rhoN, marginal(prior, prior.horizon()), "final");

  const Matrix kernel = n_step_kernel(prior, 0, prior.horizon());
  double smallest = kInf;
  for (Eigen::Index i = 0; i < kernel.size(); ++i) {
    const double v = kernel.data()[i];
    if (v > 0.0) smallest = std::min(smallest, v);
  }

  BridgeSolution sol;
  if (options.force_log_domain || smallest < kLogDomainThreshold) {
    sol = run_iteration(LogDomain{kernel.array().log().matrix()}, prior, *rho0, *rhoN, options);
    sol.log_domain = true;
  } else {
    sol = run_iteration(LinearDomain{kernel}, prior, *rho0, *rhoN, options);
  }
  finish(sol, prior);
  return sol;
}

FlowEvolution recover_flow(const MarkovPrior& prior, const BridgeSolution& sol) {
  const int n = prior.size();
  const int horizon = prior.horizon();
  if (sol.phiN.size() != n || sol.q0_star.size() != n) {
    invalid_input("solution does not match the prior's state space");
  }

  std::vector<Vector> phi(static_cast<std::size_t>(horizon) + 1);
  phi[static_cast<std::size_t>(horizon)] = sol.phiN;
  for (int t = horizon - 1; t >= 0; --t) {
    phi[static_cast<std::size_t>(t)] = prior.step(t) * phi[static_cast<std::size_t>(t) + 1];
  }

  FlowEvolution flow;
  flow.marginals = Matrix::Zero(horizon + 1, n);
  flow.marginals.row(0) = sol.q0_star.transpose();
  for (int t = 0; t < horizon; ++t) {
    const Vector& here = phi[static_cast<std::size_t>(t)];
    const Vector& there = phi[static_cast<std::size_t>(t) + 1];
    Matrix q = prior.step(t);
    for (int i = 0; i < n; ++i) {
      if (!(here(i) > 0.0)) {
        if (flow.marginals(t, i) > 0.0) {
          invalid_input("solution puts mass at time " + std::to_string(t) + " on node " +
                        std::to_string(i + 1) + " where the potential vanishes");
        }
        continue;
      }
      for (int j = 0; j < n; ++j) q(i, j) *= there(j) / here(i);
    }
    flow.marginals.row(t + 1) = flow.marginals.row(t) * q;
    flow.edge_flows.push_back(flow.marginals.row(t).transpose().asDiagonal() * q);
    flow.transitions.push_back(std::move(q));
  }
  return flow;
}

std::pair<Vector, Vector> complete_marginals(const BridgeSolution& sol) {
  return {sol.q0N.rowwise().sum(), sol.q0N.colwise().sum().transpose()};
}

double kl_divergence(const Matrix& q, const Matrix& p) {
  if (q.rows() != p.rows() || q.cols() != p.cols()) invalid_input("kl_divergence: shape mismatch");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    const double qi = q.data()[i];
    const double pi = p.data()[i];
    if (qi <= 0.0) continue;
    if (pi <= 0.0) return kInf;
    sum += qi * std::log(qi / pi);
  }
  return sum;
}

}  // namespace sbridge
