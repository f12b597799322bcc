#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <random>

#include "sbridge/moments.hpp"
#include "sbridge/oracle.hpp"
#include "support.hpp"

using namespace sbridge;
using sbtest::max_abs;

namespace {

MarkovPrior hand_prior() {
  Vector p0(3);
  p0 << 0.2, 0.5, 0.3;
  Matrix k(3, 3);
  k << 0.5, 0.3, 0.2, 0.1, 0.6, 0.3, 0.25, 0.25, 0.5;
  return MarkovPrior(p0, {k});
}

MomentSpec means(std::optional<double> m0, std::optional<double> mN) {
  MomentSpec s;
  if (m0) s.initial = SideMoments{*m0, std::nullopt};
  if (mN) s.final = SideMoments{*mN, std::nullopt};
  return s;
}

MomentSpec second_order(const Eigen::Vector4d& m) {
  MomentSpec s;
  s.order = 2;
  s.initial = SideMoments{m(0), m(2)};
  s.final = SideMoments{m(1), m(3)};
  return s;
}

std::vector<double> labels(int n) {
  std::vector<double> v;
  for (int i = 1; i <= n; ++i) v.push_back(i);
  return v;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const SolverError& e) {
    return e.kind();
  }
  FAIL("expected a SolverError");
  return ErrorKind::kInvalidInput;
}

// Positive real roots from the companion matrix.
std::vector<double> companion_positive_roots(const std::vector<double>& c) {
  std::size_t deg = c.size() - 1;
  while (c[deg] == 0.0) --deg;
  std::size_t low = 0;
  while (c[low] == 0.0) ++low;
  const auto d = static_cast<Eigen::Index>(deg - low);
  Matrix comp = Matrix::Zero(d, d);
  for (Eigen::Index i = 1; i < d; ++i) comp(i, i - 1) = 1.0;
  for (Eigen::Index i = 0; i < d; ++i) comp(i, d - 1) = -c[low + static_cast<std::size_t>(i)] / c[deg];
  Eigen::EigenSolver<Matrix> es(comp);
  std::vector<double> out;
  for (Eigen::Index i = 0; i < d; ++i) {
    const auto z = es.eigenvalues()(i);
    if (std::abs(z.imag()) < 1e-9 * std::abs(z) && z.real() > 0.0) out.push_back(z.real());
  }
  return out;
}

// Least-squares residual of log(q/p) against an affine function of the
// features on the prior's support.
double affine_residual(const Matrix& q, const Matrix& p, bool initial, bool final, bool square) {
  std::vector<std::array<double, 6>> rows;
  std::vector<double> rhs;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      if (p(i, j) <= 0.0) continue;
      const double a = i + 1.0;
      const double b = j + 1.0;
      rows.push_back({1.0, initial ? a : 0.0, final ? b : 0.0, initial && square ? a * a : 0.0,
                      final && square ? b * b : 0.0, 0.0});
      rhs.push_back(std::log(q(i, j) / p(i, j)));
    }
  }
  Matrix a(static_cast<Eigen::Index>(rows.size()), 5);
  Vector b(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (int c = 0; c < 5; ++c) a(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
    b(static_cast<Eigen::Index>(r)) = rhs[r];
  }
  const Vector x = a.completeOrthogonalDecomposition().solve(b);
  return (a * x - b).cwiseAbs().maxCoeff();
}

struct RandomMomentInstance {
  MarkovPrior prior;
  Eigen::Vector4d moments;
};

RandomMomentInstance random_moment_instance(std::mt19937& rng, int n, int N) {
  const Graph g = sbtest::random_strong_graph(rng, n, 0.6);
  MarkovPrior prior = sbtest::random_prior(rng, g, N);
  const Matrix q = sbtest::random_joint_like(rng, endpoint_joint(prior));
  return {prior, endpoint_moments(q, labels(n))};
}

}  // namespace

TEST_CASE("positive_root examples") {
  CHECK(positive_root(std::vector<double>{-4.0, 0.0, 1.0}) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(positive_root(std::vector<double>{-1.5, 1.0}) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(positive_root(std::vector<double>{3.0, -1.0}) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK_THROWS_AS(positive_root(std::vector<double>{1.0, 2.0, 3.0}), SolverError);
  CHECK_THROWS_AS(positive_root(std::vector<double>{1.0, -2.0, 1.0}), SolverError);
  CHECK_THROWS_AS(positive_root(std::vector<double>{0.0, 0.0}), SolverError);
  // Far outside the double range of r^k.
  CHECK(std::log(positive_root(std::vector<double>{-1.0, 0.0, 0.0, 0.0, 1e-300})) ==
        doctest::Approx(std::log(1e75)).epsilon(1e-12));
}

TEST_CASE("positive_root agrees with the companion matrix") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> mag(0.1, 10.0);
  std::uniform_int_distribution<int> deg(1, 9);
  for (int trial = 0; trial < 300; ++trial) {
    const int d = deg(rng);
    std::uniform_int_distribution<int> split(0, d - 1);
    const int change = split(rng);
    std::vector<double> c(static_cast<std::size_t>(d + 1));
    for (int k = 0; k <= d; ++k) c[static_cast<std::size_t>(k)] = (k <= change ? -1.0 : 1.0) * mag(rng);
    if (trial % 2) {
      for (double& x : c) x = -x;
    }
    const auto roots = companion_positive_roots(c);
    REQUIRE(roots.size() == 1);
    CHECK(std::abs(positive_root(c) - roots[0]) < 1e-12 * std::max(1.0, roots[0]));
  }
}

TEST_CASE("dual objective at zero multipliers") {
  const MarkovPrior prior = hand_prior();
  const MomentSpec spec = means(2.2, 1.8);
  DualState d;
  d.theta = -1.0;  // exp(-1 - theta) = 1: the tilt is the prior itself
  const DualEvaluation e = dual_objective_and_gradient(prior, d, spec);
  const Eigen::Vector4d pm = endpoint_moments(endpoint_joint(prior), labels(3));
  REQUIRE(e.gradient.size() == 3);
  CHECK(std::abs(e.gradient(0)) < 1e-15);
  CHECK(e.gradient(1) == doctest::Approx(pm(0) - 2.2).epsilon(1e-14));
  CHECK(e.gradient(2) == doctest::Approx(pm(1) - 1.8).epsilon(1e-14));
  CHECK(e.finite);
  d.lambda = -800.0;
  CHECK_FALSE(dual_objective_and_gradient(prior, d, spec).finite);
}

TEST_CASE("dual gradient matches central finite differences") {
  std::mt19937 rng(123);
  std::uniform_real_distribution<double> u(-0.4, 0.4);
  const MarkovPrior prior = boltzmann_prior(sbtest::figure5_graph(), 1.0, 4);
  MomentSpec spec;
  spec.order = 2;
  spec.initial = SideMoments{3.0, 12.0};
  spec.final = SideMoments{6.0, 40.0};
  const double h = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    DualState d;
    d.theta = u(rng);
    d.lambda = u(rng);
    d.mu = u(rng);
    d.alpha = 0.1 * u(rng);
    d.beta = 0.1 * u(rng);
    const DualEvaluation e = dual_objective_and_gradient(prior, d, spec);
    double* slots[5] = {&d.theta, &d.lambda, &d.mu, &d.alpha, &d.beta};
    for (int k = 0; k < 5; ++k) {
      const double keep = *slots[k];
      *slots[k] = keep + h;
      const double up = dual_objective_and_gradient(prior, d, spec).value;
      *slots[k] = keep - h;
      const double down = dual_objective_and_gradient(prior, d, spec).value;
      *slots[k] = keep;
      const double fd = (up - down) / (2 * h);
      CHECK(std::abs(fd - e.gradient(k)) <= 1e-5 * std::max(1.0, std::abs(e.gradient(k))));
    }
  }
}

TEST_CASE("dual is concave along random segments") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const MarkovPrior prior = hand_prior();
  MomentSpec spec;
  spec.order = 2;
  spec.initial = SideMoments{2.0, 4.6};
  spec.final = SideMoments{2.1, 5.0};
  auto random_state = [&] {
    DualState d;
    d.theta = u(rng);
    d.lambda = u(rng);
    d.mu = u(rng);
    d.alpha = 0.3 * u(rng);
    d.beta = 0.3 * u(rng);
    return d;
  };
  for (int trial = 0; trial < 200; ++trial) {
    const DualState a = random_state();
    const DualState b = random_state();
    DualState mid;
    mid.theta = 0.5 * (a.theta + b.theta);
    mid.lambda = 0.5 * (a.lambda + b.lambda);
    mid.mu = 0.5 * (a.mu + b.mu);
    mid.alpha = 0.5 * (a.alpha + b.alpha);
    mid.beta = 0.5 * (a.beta + b.beta);
    const double fa = dual_objective_and_gradient(prior, a, spec).value;
    const double fb = dual_objective_and_gradient(prior, b, spec).value;
    const double fm = dual_objective_and_gradient(prior, mid, spec).value;
    CHECK(fm >= 0.5 * (fa + fb) - 1e-9);
  }
}

TEST_CASE("prior means as targets leave the prior unchanged") {
  const MarkovPrior prior = boltzmann_prior(sbtest::figure5_graph(), 1.0, 4);
  const Eigen::Vector4d pm = endpoint_moments(endpoint_joint(prior), labels(9));
  const MomentSolution a = mean_bridge_dual_ascent(prior, pm(0), pm(1));
  CHECK(std::abs(a.dual.lambda) < 1e-12);
  CHECK(std::abs(a.dual.mu) < 1e-12);
  CHECK(max_abs(a.q0N - endpoint_joint(prior)) < 1e-14);
  const MomentSolution r = mean_bridge_root_iteration(prior, pm(0), pm(1));
  CHECK(std::abs(r.dual.lambda) < 1e-10);
  CHECK(std::abs(r.dual.mu) < 1e-10);
  CHECK(r.dual.iterations <= 2);
  const MomentSolution v = mean_variance_bridge(prior, second_order(pm));
  CHECK(max_abs(v.q0N - endpoint_joint(prior)) < 1e-12);
  CHECK(std::abs(v.dual.alpha) + std::abs(v.dual.beta) < 1e-10);
}

TEST_CASE("figure-5 Boltzmann T = 1 with means 1.5 and 7") {
  const MarkovPrior prior = boltzmann_prior(sbtest::figure5_graph(), 1.0, 4);
  const MomentSolution a = mean_bridge_dual_ascent(prior, 1.5, 7.0);
  const Eigen::Vector4d m = endpoint_moments(a.q0N, labels(9));
  CHECK(std::abs(m(0) - 1.5) < 1e-8);
  CHECK(std::abs(m(1) - 7.0) < 1e-8);
  CHECK(std::abs(a.q0N.sum() - 1.0) < 1e-10);
  CHECK(a.dual.grad_norm < 1e-8);
  CHECK_FALSE(a.dual.capped);
  CHECK(affine_residual(a.q0N, endpoint_joint(prior), true, true, false) < 1e-8);

  const MomentSolution r = mean_bridge_root_iteration(prior, 1.5, 7.0);
  CHECK(max_abs(r.q0N - a.q0N) < 1e-6);
  CHECK(r.dual.lambda == doctest::Approx(a.dual.lambda).epsilon(1e-6));
}

TEST_CASE("hand instance agrees with the oracle") {
  const MarkovPrior prior = hand_prior();
  const MomentSpec spec = means(2.2, 1.8);
  const OracleResult o = brute_force_bridge(endpoint_joint(prior), moment_constraints(3, spec));
  const MomentSolution a = mean_bridge_dual_ascent(prior, 2.2, 1.8);
  const MomentSolution r = mean_bridge_root_iteration(prior, 2.2, 1.8);
  CHECK(max_abs(a.q0N - o.q) < 1e-7);
  CHECK(max_abs(r.q0N - o.q) < 1e-7);
  CHECK(kl_divergence(a.q0N, endpoint_joint(prior)) <= o.kl + 1e-7);
}

TEST_CASE("root iteration polynomial root against the companion matrix") {
  // One map-A step from mu = 0 on the hand instance.
  const MarkovPrior prior = hand_prior();
  const Matrix k = n_step_kernel(prior, 0, 1);
  const double m0 = 2.2;
  std::vector<double> c(3, 0.0);
  for (int x = 0; x < 3; ++x) c[static_cast<std::size_t>(3 - (x + 1))] = prior.initial()(x) * k.row(x).sum() * (x + 1 - m0);
  const auto roots = companion_positive_roots(c);
  REQUIRE(roots.size() == 1);
  CHECK(std::abs(positive_root(c) - roots[0]) < 1e-12);
  // Its log is the multiplier that alone matches the initial mean.
  const MomentSolution half = half_bridge_moments(prior, Side::kInitial, means(m0, std::nullopt));
  CHECK(half.dual.lambda == doctest::Approx(std::log(roots[0])).epsilon(1e-9));
}

TEST_CASE("mean and variance recover a known tilt") {
  const MarkovPrior prior = hand_prior();
  const Matrix p = endpoint_joint(prior);
  Matrix truth(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double a = i + 1.0, b = j + 1.0;
      truth(i, j) = p(i, j) * std::exp(-0.3 * a + 0.2 * b + 0.15 * a * a - 0.1 * b * b);
    }
  truth /= truth.sum();
  const MomentSolution s = mean_variance_bridge(prior, second_order(endpoint_moments(truth, labels(3))));
  CHECK(max_abs(s.q0N - truth) < 1e-7);
  CHECK(s.dual.lambda == doctest::Approx(0.3).epsilon(1e-6));
  CHECK(s.dual.alpha == doctest::Approx(-0.15).epsilon(1e-6));
  CHECK(affine_residual(s.q0N, p, true, true, true) < 1e-8);
}

TEST_CASE("zero variance concentrates the initial marginal") {
  const MarkovPrior prior = hand_prior();
  MomentSpec spec;
  spec.order = 2;
  spec.initial = SideMoments{2.0, 4.0};
  const MomentSolution s = mean_variance_bridge(prior, spec);
  CHECK(s.q0N.row(1).sum() > 1.0 - 1e-6);
  CHECK(std::abs(s.q0N.sum() - 1.0) < 1e-10);

  MomentOptions low_cap;
  low_cap.multiplier_cap = 5.0;
  const MomentSolution c = mean_variance_bridge(prior, spec, low_cap);
  CHECK(c.dual.capped);
  CHECK_FALSE(c.dual.warnings.empty());
  CHECK(std::abs(c.dual.alpha) <= 5.0);
}

TEST_CASE("half-bridge moments") {
  const MarkovPrior prior = hand_prior();
  const Matrix p = endpoint_joint(prior);
  const Eigen::Vector4d pm = endpoint_moments(p, labels(3));
  const MomentSolution same = half_bridge_moments(prior, Side::kInitial, means(pm(0), std::nullopt));
  CHECK(max_abs(same.q0N - p) < 1e-14);

  const MomentSolution fin = half_bridge_moments(prior, Side::kFinal, means(std::nullopt, 2.5));
  CHECK(fin.dual.lambda == 0.0);
  // q0N / p0N depends on xN only.
  const Matrix ratio = fin.q0N.cwiseQuotient(p);
  for (int j = 0; j < 3; ++j)
    for (int i = 1; i < 3; ++i) CHECK(ratio(i, j) == doctest::Approx(ratio(0, j)).epsilon(1e-12));
  const OracleResult o = brute_force_bridge(p, moment_constraints(3, means(std::nullopt, 2.5)));
  CHECK(max_abs(fin.q0N - o.q) < 1e-7);
  CHECK(endpoint_moments(fin.q0N, labels(3))(1) == doctest::Approx(2.5).epsilon(1e-10));

  CHECK_THROWS_AS(half_bridge_moments(prior, Side::kInitial, means(2.0, 2.0)), SolverError);
  CHECK_THROWS_AS(half_bridge_moments(prior, Side::kInitial, means(std::nullopt, 2.0)), SolverError);
}

TEST_CASE("moment solutions match the oracle on random small instances") {
  std::mt19937 rng(314);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 3 + trial % 2;
    const int N = 1 + (trial / 2) % 2;
    const RandomMomentInstance inst = random_moment_instance(rng, n, N);
    const Matrix p = endpoint_joint(inst.prior);
    const MomentSpec spec = trial % 3 == 0 ? second_order(inst.moments)
                                           : means(inst.moments(0), inst.moments(1));
    const MomentSolution s = solve_moment_bridge(inst.prior, spec);
    const OracleResult o = brute_force_bridge(p, moment_constraints(n, spec));
    CHECK(max_abs(s.q0N - o.q) < 1e-7);
    const double kl = kl_divergence(s.q0N, p);
    CHECK(kl <= o.kl + 1e-7);
    CHECK(o.kl <= kl + 1e-7);
    const Eigen::Vector4d m = endpoint_moments(s.q0N, labels(n));
    CHECK(std::abs(m(0) - inst.moments(0)) < 1e-9);
    CHECK(std::abs(m(1) - inst.moments(1)) < 1e-9);
    if (spec.order == 2) {
      CHECK(std::abs(m(2) - inst.moments(2)) < 1e-9);
      CHECK(std::abs(m(3) - inst.moments(3)) < 1e-9);
    } else {
      const MomentSolution r = mean_bridge_root_iteration(inst.prior, inst.moments(0), inst.moments(1));
      CHECK(max_abs(r.q0N - s.q0N) < 1e-6);
    }
  }
}

TEST_CASE("infeasible and malformed moment specs") {
  const MarkovPrior prior = hand_prior();
  CHECK(kind_of([&] { mean_bridge_dual_ascent(prior, 1.0, 2.0); }) == ErrorKind::kInfeasible);
  CHECK(kind_of([&] { mean_bridge_dual_ascent(prior, 2.0, 3.5); }) == ErrorKind::kInfeasible);
  CHECK(kind_of([&] { mean_bridge_root_iteration(prior, 0.5, 2.0); }) == ErrorKind::kInfeasible);
  MomentSpec neg;
  neg.order = 2;
  neg.initial = SideMoments{2.0, 3.5};  // variance < 0
  CHECK(kind_of([&] { mean_variance_bridge(prior, neg); }) == ErrorKind::kInfeasible);
  MomentSpec wide = neg;
  wide.initial = SideMoments{2.0, 5.5};  // beyond the chord through (1,1) and (3,9)
  CHECK(kind_of([&] { mean_variance_bridge(prior, wide); }) == ErrorKind::kInfeasible);

  CHECK(kind_of([&] { solve_moment_bridge(prior, MomentSpec{}); }) == ErrorKind::kInvalidInput);
  MomentSpec bad_order = means(2.0, 2.0);
  bad_order.order = 3;
  CHECK(kind_of([&] { solve_moment_bridge(prior, bad_order); }) == ErrorKind::kInvalidInput);
  MomentSpec missing;
  missing.order = 2;
  missing.initial = SideMoments{2.0, std::nullopt};
  CHECK(kind_of([&] { solve_moment_bridge(prior, missing); }) == ErrorKind::kInvalidInput);

  // Diagonal kernel: x0 = xN, so only equal means are achievable and none
  // lies in the interior.
  const MarkovPrior diag(prior.initial(), {Matrix::Identity(3, 3)});
  CHECK(kind_of([&] { mean_bridge_dual_ascent(diag, 2.0, 2.2); }) == ErrorKind::kInfeasible);
  CHECK(kind_of([&] { mean_bridge_dual_ascent(diag, 2.0, 2.0); }) == ErrorKind::kInfeasible);
}

TEST_CASE("custom node values") {
  const MarkovPrior prior = hand_prior();
  MomentSpec spec = means(0.5, 4.0);
  spec.node_values = std::vector<double>{-1.0, 0.0, 10.0};
  const MomentSolution s = solve_moment_bridge(prior, spec);
  const Eigen::Vector4d m = endpoint_moments(s.q0N, *spec.node_values);
  CHECK(m(0) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(m(1) == doctest::Approx(4.0).epsilon(1e-10));
  const OracleResult o = brute_force_bridge(endpoint_joint(prior), moment_constraints(3, spec));
  CHECK(max_abs(s.q0N - o.q) < 1e-7);
}

TEST_CASE("moment solution potentials factor the joint") {
  const MarkovPrior prior = boltzmann_prior(sbtest::figure5_graph(), 1.0, 4);
  const MomentSpec spec = means(1.5, 7.0);
  const MomentSolution m = solve_moment_bridge(prior, spec);
  const BridgeSolution b = moment_bridge_solution(prior, m, spec);
  const Matrix k = n_step_kernel(prior, 0, 4);
  CHECK(max_abs(b.q0N - b.phihat0.asDiagonal() * k * b.phiN.asDiagonal()) < 1e-12);
  const FlowEvolution f = recover_flow(prior, b);
  CHECK(max_abs(f.marginals.row(4).transpose() - b.qN_star) < 1e-10);
  for (int t = 0; t <= 4; ++t) CHECK(std::abs(f.marginals.row(t).sum() - 1.0) < 1e-10);
}
