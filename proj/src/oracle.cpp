#include "sbridge/oracle.hpp"

#include <cmath>
#include <functional>

namespace sbridge {

namespace {

constexpr double kFeasibilityFloor = 1e-9;

struct Residual {
  Vector dual;
  Vector primal;
  double norm() const { return std::sqrt(dual.squaredNorm() + primal.squaredNorm()); }
};

}  // namespace

OracleResult brute_force_bridge(const Matrix& p0N, const std::vector<LinearConstraint>& constraints) {
  const auto rows = p0N.rows();
  const auto cols = p0N.cols();
  if (rows * cols > 400) invalid_input("oracle instance too large");
  if ((p0N.array() < 0.0).any() || !p0N.allFinite()) invalid_input("oracle prior must be nonnegative");

  std::vector<LinearConstraint> all = constraints;
  all.push_back({Matrix::Ones(rows, cols), 1.0});
  for (const auto& c : all) {
    if (c.coefficients.rows() != rows || c.coefficients.cols() != cols) {
      invalid_input("constraint shape does not match the prior");
    }
  }

  // Free variables: the prior's support minus entries pinned to zero by a
  // constraint with nonnegative coefficients and zero right-hand side.
  std::vector<bool> free(static_cast<std::size_t>(rows * cols));
  for (Eigen::Index k = 0; k < rows * cols; ++k) free[static_cast<std::size_t>(k)] = p0N(k) > 0.0;
  for (const auto& c : all) {
    if (c.rhs != 0.0 || (c.coefficients.array() < 0.0).any()) continue;
    for (Eigen::Index k = 0; k < rows * cols; ++k) {
      if (c.coefficients(k) > 0.0) free[static_cast<std::size_t>(k)] = false;
    }
  }
  std::vector<Eigen::Index> index;
  for (Eigen::Index k = 0; k < rows * cols; ++k) {
    if (free[static_cast<std::size_t>(k)]) index.push_back(k);
  }
  const auto m = static_cast<Eigen::Index>(index.size());
  const auto c_count = static_cast<Eigen::Index>(all.size());
  if (m == 0) throw SolverError(ErrorKind::kInfeasible, "no free variables");

  Matrix a(c_count, m);
  Vector b(c_count);
  Vector log_p(m);
  for (Eigen::Index r = 0; r < c_count; ++r) {
    b(r) = all[static_cast<std::size_t>(r)].rhs;
    for (Eigen::Index k = 0; k < m; ++k) {
      a(r, k) = all[static_cast<std::size_t>(r)].coefficients(index[static_cast<std::size_t>(k)]);
    }
  }
  for (Eigen::Index k = 0; k < m; ++k) log_p(k) = std::log(p0N(index[static_cast<std::size_t>(k)]));

  // Drop linearly dependent constraint rows.
  Eigen::ColPivHouseholderQR<Matrix> qr(a.transpose());
  qr.setThreshold(1e-10);
  const auto rank = qr.rank();
  Matrix ar(rank, m);
  Vector br(rank);
  for (Eigen::Index r = 0; r < rank; ++r) {
    const auto src = qr.colsPermutation().indices()(r);
    ar.row(r) = a.row(src);
    br(r) = b(src);
  }

  Vector q = (log_p.array().exp()).matrix();
  q /= q.sum();
  Vector nu = Vector::Zero(rank);
  auto residual = [&](const Vector& qq, const Vector& nn) {
    Residual r;
    r.dual = (qq.array().log().matrix() - log_p).array() + 1.0;
    r.dual += ar.transpose() * nn;
    r.primal = ar * qq - br;
    return r;
  };

  Residual res = residual(q, nu);
  int it = 0;
  for (; it < 500; ++it) {
    if (res.norm() < 1e-14) break;
    // Newton step on the KKT system with H = diag(1/q).
    const Matrix aq = ar * q.asDiagonal();
    const Matrix s = aq * ar.transpose();
    const Vector rhs = res.primal - aq * res.dual;
    const Vector dnu = s.completeOrthogonalDecomposition().solve(rhs);
    const Vector dq = -(q.array() * (res.dual + ar.transpose() * dnu).array()).matrix();

    double t = 1.0;
    for (Eigen::Index k = 0; k < m; ++k) {
      if (dq(k) < 0.0) t = std::min(t, -0.99 * q(k) / dq(k));
    }
    const double base = res.norm();
    bool moved = false;
    for (int h = 0; h < 80; ++h, t *= 0.5) {
      const Vector qt = q + t * dq;
      if ((qt.array() <= 0.0).any()) continue;
      const Residual rt = residual(qt, nu + t * dnu);
      if (rt.norm() <= (1.0 - 0.01 * t) * base) {
        q = qt;
        nu += t * dnu;
        res = rt;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }

  OracleResult out;
  out.iterations = it;
  out.q = Matrix::Zero(rows, cols);
  for (Eigen::Index k = 0; k < m; ++k) out.q(index[static_cast<std::size_t>(k)]) = q(k);
  out.stationarity = res.dual.norm();
  out.residual = 0.0;
  for (const auto& c : all) {
    out.residual = std::max(out.residual, std::abs((c.coefficients.array() * out.q.array()).sum() - c.rhs));
  }
  if (out.residual > kFeasibilityFloor) {
    throw SolverError(ErrorKind::kInfeasible,
                      "constraints infeasible; residual floor " + std::to_string(out.residual), it,
                      out.residual);
  }
  out.kl = kl_divergence(out.q, p0N);
  return out;
}

std::vector<LinearConstraint> marginal_constraints(int n,
                                                   const std::optional<PartialMarginal>& rho0,
                                                   const std::optional<PartialMarginal>& rhoN) {
  std::vector<LinearConstraint> out;
  if (rho0) {
    if (rho0->state_count() != n) invalid_input("initial marginal size mismatch");
    for (int x : rho0->nodes()) {
      Matrix c = Matrix::Zero(n, n);
      c.row(x).setOnes();
      out.push_back({c, rho0->value(x)});
    }
  }
  if (rhoN) {
    if (rhoN->state_count() != n) invalid_input("final marginal size mismatch");
    for (int x : rhoN->nodes()) {
      Matrix c = Matrix::Zero(n, n);
      c.col(x).setOnes();
      out.push_back({c, rhoN->value(x)});
    }
  }
  return out;
}

std::vector<LinearConstraint> moment_constraints(int n, const MomentSpec& spec) {
  const auto values = resolve_node_values(spec, n);
  const Eigen::Map<const Vector> v(values.data(), n);
  const Vector ones = Vector::Ones(n);
  std::vector<LinearConstraint> out;
  auto add = [&](bool initial, int power, double target) {
    const Vector f = power == 1 ? Vector(v) : Vector(v.array().square().matrix());
    out.push_back({initial ? Matrix(f * ones.transpose()) : Matrix(ones * f.transpose()), target});
  };
  if (spec.initial) add(true, 1, spec.initial->mean);
  if (spec.final) add(false, 1, spec.final->mean);
  if (spec.order == 2) {
    if (spec.initial && spec.initial->second_moment) add(true, 2, *spec.initial->second_moment);
    if (spec.final && spec.final->second_moment) add(false, 2, *spec.final->second_moment);
  }
  return out;
}

PathLaw brute_force_paths(const MarkovPrior& prior, const std::optional<std::pair<int, int>>& endpoints) {
  const int n = prior.size();
  const int horizon = prior.horizon();
  double total = 1.0;
  for (int t = 0; t <= horizon; ++t) {
    total *= n;
    if (total > 1e6) invalid_input("path enumeration too large");
  }
  if (endpoints && (endpoints->first < 0 || endpoints->first >= n || endpoints->second < 0 ||
                    endpoints->second >= n)) {
    invalid_input("conditioning node out of range");
  }

  PathLaw law;
  Path path(static_cast<std::size_t>(horizon + 1));
  std::function<void(int, double)> walk = [&](int t, double prob) {
    if (t == horizon) {
      if (endpoints && path.back() != endpoints->second) return;
      law.paths.push_back(path);
      law.probabilities.push_back(prob);
      return;
    }
    const int i = path[static_cast<std::size_t>(t)];
    for (int j = 0; j < n; ++j) {
      const double pij = prior.step(t)(i, j);
      if (pij <= 0.0) continue;
      path[static_cast<std::size_t>(t + 1)] = j;
      walk(t + 1, prob * pij);
    }
  };
  for (int x = 0; x < n; ++x) {
    if (endpoints && x != endpoints->first) continue;
    if (prior.initial()(x) <= 0.0) continue;
    path[0] = x;
    walk(0, prior.initial()(x));
  }

  double mass = 0.0;
  for (double p : law.probabilities) mass += p;
  if (!(mass > 0.0)) invalid_input("conditioning event has zero prior probability");
  if (endpoints) {
    for (double& p : law.probabilities) p /= mass;
  }
  return law;
}

}  // namespace sbridge
