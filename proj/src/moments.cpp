#include "sbridge/moments.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace sbridge {

std::vector<double> resolve_node_values(const MomentSpec& spec, int n) {
  if (spec.node_values) {
    if (static_cast<int>(spec.node_values->size()) != n) {
      invalid_input("node_values must have one entry per state");
    }
    for (double v : *spec.node_values) {
      if (!std::isfinite(v)) invalid_input("node_values must be finite");
    }
    return *spec.node_values;
  }
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = i + 1.0;
  return v;
}

Eigen::Vector4d endpoint_moments(const Matrix& q0N, const std::vector<double>& values) {
  const Eigen::Map<const Vector> v(values.data(), static_cast<Eigen::Index>(values.size()));
  const Vector r = q0N.rowwise().sum();
  const Vector c = q0N.colwise().sum().transpose();
  const Vector v2 = v.array().square().matrix();
  return {r.dot(v), c.dot(v), r.dot(v2), c.dot(v2)};
}

namespace {

constexpr double kArmijo = 1e-4;
constexpr double kShrink = 0.5;
constexpr int kMaxHalvings = 60;

double log_sum_exp(std::span<const double> v) {
  double m = -kInf;
  for (double x : v) m = std::max(m, x);
  if (m == -kInf) return -kInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

struct Feature {
  Side side;
  int power;
  double target;
};

// Order of the multipliers: lambda (x0), mu (xN), alpha (x0^2), beta (xN^2).
std::vector<Feature> active_features(const MomentSpec& spec) {
  if (spec.order != 1 && spec.order != 2) invalid_input("moment order must be 1 or 2");
  if (!spec.initial && !spec.final) invalid_input("moment spec constrains neither side");
  for (const auto* side : {&spec.initial, &spec.final}) {
    if (!*side) continue;
    if (!std::isfinite((*side)->mean)) invalid_input("moment targets must be finite");
    if (spec.order == 2 && !(*side)->second_moment) {
      invalid_input("order-2 spec needs a second moment on every constrained side");
    }
    if (spec.order == 1 && (*side)->second_moment) {
      invalid_input("second moment given for an order-1 spec");
    }
  }
  std::vector<Feature> f;
  if (spec.initial) f.push_back({Side::kInitial, 1, spec.initial->mean});
  if (spec.final) f.push_back({Side::kFinal, 1, spec.final->mean});
  if (spec.order == 2) {
    if (spec.initial) f.push_back({Side::kInitial, 2, *spec.initial->second_moment});
    if (spec.final) f.push_back({Side::kFinal, 2, *spec.final->second_moment});
  }
  return f;
}

double* multiplier_slot(DualState& d, const Feature& f) {
  if (f.power == 1) return f.side == Side::kInitial ? &d.lambda : &d.mu;
  return f.side == Side::kInitial ? &d.alpha : &d.beta;
}

double multiplier_of(const DualState& d, const Feature& f) {
  return *multiplier_slot(const_cast<DualState&>(d), f);
}

// Exponential family q(w) proportional to p0N exp(-w . f) over the support
// of the prior endpoint joint.
class TiltFamily {
 public:
  TiltFamily(const MarkovPrior& prior, std::vector<Feature> features, std::vector<double> values)
      : features_(std::move(features)), values_(std::move(values)) {
    joint_ = endpoint_joint(prior);
    n_ = prior.size();
    const auto k = static_cast<Eigen::Index>(features_.size());
    targets_ = Vector(k);
    for (Eigen::Index a = 0; a < k; ++a) targets_(a) = features_[static_cast<std::size_t>(a)].target;
    for (int i = 0; i < n_; ++i) {
      for (int j = 0; j < n_; ++j) {
        if (joint_(i, j) <= 0.0) continue;
        Cell c{i, j, std::log(joint_(i, j)), Vector(k)};
        for (Eigen::Index a = 0; a < k; ++a) c.f(a) = feature_value(features_[static_cast<std::size_t>(a)], i, j);
        cells_.push_back(std::move(c));
      }
    }
  }

  double feature_value(const Feature& f, int i, int j) const {
    const double v = values_[static_cast<std::size_t>(f.side == Side::kInitial ? i : j)];
    return f.power == 1 ? v : v * v;
  }

  struct Eval {
    double log_z = 0.0;
    double objective = 0.0;  // -log Z - w . m
    Vector mean;             // E_q f
    Matrix cov;              // Cov_q f
    Vector grad;             // E_q f - m
    bool finite = true;
  };

  Eval evaluate(const Vector& w, bool with_cov) const {
    Eval e;
    const auto k = w.size();
    std::vector<double> logs(cells_.size());
    for (std::size_t c = 0; c < cells_.size(); ++c) logs[c] = cells_[c].log_p - w.dot(cells_[c].f);
    e.log_z = log_sum_exp(logs);
    e.mean = Vector::Zero(k);
    e.cov = Matrix::Zero(k, k);
    for (std::size_t c = 0; c < cells_.size(); ++c) {
      const double q = std::exp(logs[c] - e.log_z);
      e.mean += q * cells_[c].f;
      if (with_cov) e.cov += q * cells_[c].f * cells_[c].f.transpose();
    }
    if (with_cov) e.cov -= e.mean * e.mean.transpose();
    e.grad = e.mean - targets_;
    e.objective = -e.log_z - w.dot(targets_);
    e.finite = std::isfinite(e.log_z) && e.mean.allFinite();
    return e;
  }

  Matrix tilted(const Vector& w, double log_z) const {
    Matrix q = Matrix::Zero(n_, n_);
    for (const Cell& c : cells_) q(c.i, c.j) = std::exp(c.log_p - w.dot(c.f) - log_z);
    return q;
  }

  const Vector& targets() const { return targets_; }
  const std::vector<Feature>& features() const { return features_; }
  const Matrix& joint() const { return joint_; }
  const std::vector<double>& values() const { return values_; }

 private:
  struct Cell {
    int i;
    int j;
    double log_p;
    Vector f;
  };
  std::vector<Feature> features_;
  std::vector<double> values_;
  Matrix joint_;
  int n_ = 0;
  Vector targets_;
  std::vector<Cell> cells_;
};

// --- feasibility -----------------------------------------------------------

using Point = std::array<double, 2>;

double cross(const Point& o, const Point& a, const Point& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

std::vector<Point> convex_hull(std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Point> hull(2 * pts.size());
  std::size_t k = 0;
  for (const Point& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i > 0; --i) {
    const Point& p = pts[i - 1];
    while (k >= t && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  hull.resize(k - 1);
  return hull;
}

std::vector<double> support_values(const Vector& marginal, const std::vector<double>& values) {
  std::vector<double> s;
  for (Eigen::Index i = 0; i < marginal.size(); ++i) {
    if (marginal(i) > 0.0) s.push_back(values[static_cast<std::size_t>(i)]);
  }
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

void check_mean_in_range(const std::vector<double>& s, double mean, const char* side) {
  if (s.size() < 2) invalid_input(std::string(side) + " marginal of the prior is degenerate");
  if (!(mean > s.front() && mean < s.back())) {
    throw SolverError(ErrorKind::kInfeasible,
                      std::string(side) + " mean " + std::to_string(mean) +
                          " is outside the open range of the prior's support");
  }
}

// (m1, m2) must lie in the hull of {(v, v^2)}; the lower boundary (piecewise
// linear interpolation of v^2) is accepted as a degenerate limit.
void check_second_moment(const std::vector<double>& s, double m1, double m2, const char* side) {
  check_mean_in_range(s, m1, side);
  const auto hi = std::upper_bound(s.begin(), s.end(), m1);
  const double b = *hi;
  const double a = *(hi - 1);
  const double lower = a * a + (b * b - a * a) * (m1 - a) / (b - a);
  const double upper =
      s.front() * s.front() +
      (s.back() * s.back() - s.front() * s.front()) * (m1 - s.front()) / (s.back() - s.front());
  const double slack = 1e-12 * std::max(1.0, std::abs(upper));
  if (m2 < lower - slack || m2 > upper + slack) {
    throw SolverError(ErrorKind::kInfeasible,
                      std::string(side) + " moments (" + std::to_string(m1) + ", " +
                          std::to_string(m2) + ") are not achievable on the prior's support");
  }
}

void check_feasible(const TiltFamily& family, const MomentSpec& spec) {
  const Matrix& joint = family.joint();
  const auto& values = family.values();
  const Vector r = joint.rowwise().sum();
  const Vector c = joint.colwise().sum().transpose();
  const auto s0 = support_values(r, values);
  const auto sN = support_values(c, values);

  if (spec.order == 1 && spec.initial && spec.final) {
    check_mean_in_range(s0, spec.initial->mean, "initial");
    check_mean_in_range(sN, spec.final->mean, "final");
    std::vector<Point> pts;
    for (Eigen::Index i = 0; i < joint.rows(); ++i) {
      for (Eigen::Index j = 0; j < joint.cols(); ++j) {
        if (joint(i, j) > 0.0) {
          pts.push_back({values[static_cast<std::size_t>(i)], values[static_cast<std::size_t>(j)]});
        }
      }
    }
    const auto hull = convex_hull(pts);
    const Point target{spec.initial->mean, spec.final->mean};
    bool inside = hull.size() >= 3;
    for (std::size_t k = 0; inside && k < hull.size(); ++k) {
      const Point& a = hull[k];
      const Point& b = hull[(k + 1) % hull.size()];
      const double scale = std::hypot(b[0] - a[0], b[1] - a[1]);
      inside = cross(a, b, target) > 1e-12 * scale;
    }
    if (!inside) {
      throw SolverError(ErrorKind::kInfeasible,
                        "mean pair lies outside the interior of the achievable set");
    }
    return;
  }
  if (spec.initial) {
    if (spec.order == 2) {
      check_second_moment(s0, spec.initial->mean, *spec.initial->second_moment, "initial");
    } else {
      check_mean_in_range(s0, spec.initial->mean, "initial");
    }
  }
  if (spec.final) {
    if (spec.order == 2) {
      check_second_moment(sN, spec.final->mean, *spec.final->second_moment, "final");
    } else {
      check_mean_in_range(sN, spec.final->mean, "final");
    }
  }
}

DualState state_from(const TiltFamily& family, const Vector& w, const TiltFamily::Eval& e) {
  DualState d;
  for (std::size_t a = 0; a < family.features().size(); ++a) {
    *multiplier_slot(d, family.features()[a]) = w(static_cast<Eigen::Index>(a));
  }
  // exp(-1 - theta) = 1 / Z.
  d.theta = e.log_z - 1.0;
  d.objective = e.objective;
  d.grad_norm = e.grad.norm();
  return d;
}

}  // namespace

DualEvaluation dual_objective_and_gradient(const MarkovPrior& prior, const DualState& dual,
                                           const MomentSpec& spec) {
  const auto features = active_features(spec);
  const TiltFamily family(prior, features, resolve_node_values(spec, prior.size()));
  Vector w(static_cast<Eigen::Index>(features.size()));
  for (std::size_t a = 0; a < features.size(); ++a) {
    w(static_cast<Eigen::Index>(a)) = multiplier_of(dual, features[a]);
  }
  const auto e = family.evaluate(w, false);

  DualEvaluation out;
  // Mass of the tilted primal: exp(-1 - theta) Z.
  const double mass = std::exp(-1.0 - dual.theta + e.log_z);
  out.value = -mass - w.dot(family.targets()) - dual.theta;
  out.gradient = Vector(w.size() + 1);
  out.gradient(0) = mass - 1.0;
  out.gradient.tail(w.size()) = mass * e.mean - family.targets();
  out.finite = std::isfinite(out.value) && out.gradient.allFinite();
  return out;
}

MomentSolution solve_moment_bridge(const MarkovPrior& prior, const MomentSpec& spec,
                                   const MomentOptions& options) {
  if (!(options.tol > 0.0)) invalid_input("tolerance must be positive");
  const auto features = active_features(spec);
  const TiltFamily family(prior, features, resolve_node_values(spec, prior.size()));
  check_feasible(family, spec);

  const auto k = static_cast<Eigen::Index>(features.size());
  Vector w = Vector::Zero(k);
  auto e = family.evaluate(w, true);
  bool capped = false;
  int it = 0;
  for (; it < options.max_iter; ++it) {
    if (!e.finite) {
      throw SolverError(ErrorKind::kNonConvergence, "dual evaluation overflowed", it);
    }
    if (e.grad.norm() < options.tol) break;

    // Newton direction for the concave dual (Hessian = -Cov), gradient as
    // fallback when the covariance is numerically singular.
    Vector dir = e.cov.ldlt().solve(e.grad);
    if (!dir.allFinite() || e.grad.dot(dir) <= 0.0) dir = e.grad;
    const double slope = e.grad.dot(dir);

    double step = 1.0;
    bool accepted = false;
    TiltFamily::Eval trial;
    Vector candidate;
    for (int h = 0; h < kMaxHalvings; ++h, step *= kShrink) {
      candidate = w + step * dir;
      trial = family.evaluate(candidate, true);
      if (!trial.finite) continue;
      const double gain = trial.objective - e.objective;
      const bool armijo = gain >= kArmijo * step * slope;
      // Near the optimum the dual changes below rounding; accept steps that
      // still shrink the gradient.
      const bool flat = std::abs(gain) <= 1e-14 * (1.0 + std::abs(e.objective)) &&
                        trial.grad.norm() < e.grad.norm();
      if (armijo || flat) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      throw SolverError(ErrorKind::kNonConvergence, "dual line search failed", it,
                        e.grad.norm());
    }
    bool clamped = false;
    for (Eigen::Index a = 0; a < k; ++a) {
      if (std::abs(candidate(a)) > options.multiplier_cap) {
        candidate(a) = std::copysign(options.multiplier_cap, candidate(a));
        clamped = true;
      }
    }
    w = candidate;
    e = clamped ? family.evaluate(w, true) : trial;
    if (clamped) {
      capped = true;
      ++it;
      break;
    }
  }
  if (!capped && e.grad.norm() >= options.tol) {
    throw SolverError(ErrorKind::kNonConvergence, "dual ascent hit max_iter", it,
                      e.grad.norm());
  }

  MomentSolution sol;
  sol.dual = state_from(family, w, e);
  sol.dual.iterations = it;
  sol.dual.capped = capped;
  if (capped) {
    sol.dual.warnings.push_back(
        "multiplier reached the cap of " + std::to_string(options.multiplier_cap) +
        "; targets are near-degenerate and the tilt is truncated");
  }
  sol.q0N = family.tilted(w, e.log_z);
  return sol;
}

MomentSolution mean_bridge_dual_ascent(const MarkovPrior& prior, double m0, double mN,
                                       const MomentOptions& options) {
  MomentSpec spec;
  spec.initial = SideMoments{m0, std::nullopt};
  spec.final = SideMoments{mN, std::nullopt};
  return solve_moment_bridge(prior, spec, options);
}

MomentSolution mean_variance_bridge(const MarkovPrior& prior, const MomentSpec& spec,
                                    const MomentOptions& options) {
  if (spec.order != 2) invalid_input("mean_variance_bridge needs an order-2 spec");
  return solve_moment_bridge(prior, spec, options);
}

MomentSolution half_bridge_moments(const MarkovPrior& prior, Side side, const MomentSpec& spec,
                                   const MomentOptions& options) {
  const bool initial = side == Side::kInitial;
  if (initial ? (!spec.initial || spec.final) : (!spec.final || spec.initial)) {
    invalid_input("half-bridge moment spec must constrain exactly the requested side");
  }
  return solve_moment_bridge(prior, spec, options);
}

namespace {

// Sign of sum_k c_k exp(k u), evaluated with a common scale so it neither
// overflows nor underflows.
int poly_sign(std::span<const double> c, double u) {
  double top = -kInf;
  for (std::size_t k = 0; k < c.size(); ++k) {
    if (c[k] != 0.0) top = std::max(top, std::log(std::abs(c[k])) + static_cast<double>(k) * u);
  }
  double s = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k) {
    if (c[k] == 0.0) continue;
    s += std::copysign(std::exp(std::log(std::abs(c[k])) + static_cast<double>(k) * u - top), c[k]);
  }
  return s > 0.0 ? 1 : (s < 0.0 ? -1 : 0);
}

}  // namespace

double positive_root(std::span<const double> coeffs) {
  int low_sign = 0;
  int high_sign = 0;
  int changes = 0;
  int prev = 0;
  for (double c : coeffs) {
    if (!std::isfinite(c)) invalid_input("polynomial coefficient is not finite");
    if (c == 0.0) continue;
    const int s = c > 0.0 ? 1 : -1;
    if (low_sign == 0) low_sign = s;
    if (prev != 0 && s != prev) ++changes;
    prev = s;
    high_sign = s;
  }
  if (changes != 1) {
    invalid_input("positive_root needs exactly one coefficient sign change, found " +
                  std::to_string(changes));
  }

  // Bisection on u = log r: sign is low_sign below the root, high_sign above.
  double lo = -1.0;
  double hi = 1.0;
  for (double step = 1.0; poly_sign(coeffs, lo) == high_sign; step *= 2.0) lo -= step;
  for (double step = 1.0; poly_sign(coeffs, hi) == low_sign; step *= 2.0) hi += step;
  if (poly_sign(coeffs, lo) == 0) return std::exp(lo);
  if (poly_sign(coeffs, hi) == 0) return std::exp(hi);
  for (int it = 0; it < 2000; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (hi - lo <= 1e-15) break;
    const int s = poly_sign(coeffs, mid);
    if (s == 0) return std::exp(mid);
    (s == low_sign ? lo : hi) = mid;
  }
  return std::exp(0.5 * (lo + hi));
}

MomentSolution mean_bridge_root_iteration(const MarkovPrior& prior, double m0, double mN,
                                          const MomentOptions& options) {
  MomentSpec spec;
  spec.initial = SideMoments{m0, std::nullopt};
  spec.final = SideMoments{mN, std::nullopt};
  const int n = prior.size();
  const auto feats = active_features(spec);
  const TiltFamily family(prior, feats, resolve_node_values(spec, n));
  check_feasible(family, spec);

  const Matrix kernel = n_step_kernel(prior, 0, prior.horizon());
  const Matrix log_k = kernel.array().log().matrix();
  const Vector log_p0 = prior.initial().array().log().matrix();
  // Exponent of r for node x (label x+1) after clearing denominators.
  auto degree = [n](int x) { return static_cast<std::size_t>(n - (x + 1)); };

  // Coefficients of sum_x w(x) (label - m) r^(n - label), scaled so the
  // largest weight is 1.
  auto coefficients = [&](const Vector& log_w, double m) {
    const double top = log_w.maxCoeff();
    std::vector<double> c(static_cast<std::size_t>(n), 0.0);
    for (int x = 0; x < n; ++x) {
      if (log_w(x) == -kInf) continue;
      c[degree(x)] = std::exp(log_w(x) - top) * ((x + 1.0) - m);
    }
    return c;
  };
  auto lse = [](const Vector& v) {
    const double m = v.maxCoeff();
    return m == -kInf ? -kInf : m + std::log((v.array() - m).exp().sum());
  };
  const Vector labels = Vector::LinSpaced(n, 1.0, static_cast<double>(n));

  double lambda = 0.0;
  double mu = 0.0;
  int it = 0;
  bool converged = false;
  double delta = kInf;
  while (it < options.max_iter) {
    ++it;
    // h(mu, x0) = p0(x0) sum_xN K(x0, xN) exp(-mu xN)
    Vector log_h(n);
    for (int x = 0; x < n; ++x) {
      log_h(x) = log_p0(x) + lse(log_k.row(x).transpose() - mu * labels);
    }
    const auto ch = coefficients(log_h, m0);
    const double next_lambda = std::log(positive_root(ch));
    // g(lambda, xN) = sum_x0 K(x0, xN) p0(x0) exp(-lambda x0)
    Vector log_g(n);
    for (int y = 0; y < n; ++y) {
      log_g(y) = lse(log_k.col(y) + log_p0 - next_lambda * labels);
    }
    const auto cg = coefficients(log_g, mN);
    const double next_mu = std::log(positive_root(cg));
    delta = std::abs(next_lambda - lambda) + std::abs(next_mu - mu);
    lambda = next_lambda;
    mu = next_mu;
    if (delta < options.tol) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw SolverError(ErrorKind::kNonConvergence, "root iteration did not converge", it, delta);
  }

  Vector w(2);
  w << lambda, mu;
  const auto e = family.evaluate(w, false);
  MomentSolution sol;
  sol.dual = state_from(family, w, e);
  sol.dual.iterations = it;
  sol.q0N = family.tilted(w, e.log_z);
  return sol;
}

BridgeSolution moment_bridge_solution(const MarkovPrior& prior, const MomentSolution& sol,
                                      const MomentSpec& spec) {
  const int n = prior.size();
  const auto values = resolve_node_values(spec, n);
  const DualState& d = sol.dual;
  Vector log_hat(n);
  Vector log_phi(n);
  for (int x = 0; x < n; ++x) {
    const double v = values[static_cast<std::size_t>(x)];
    log_hat(x) = std::log(prior.initial()(x)) - 1.0 - d.theta - d.lambda * v - d.alpha * v * v;
    log_phi(x) = -d.mu * v - d.beta * v * v;
  }
  // Move the scale of phiN into phihat0 so both stay representable.
  const Vector pN = marginal(prior, prior.horizon());
  double shift = -kInf;
  for (int x = 0; x < n; ++x) {
    if (pN(x) > 0.0) shift = std::max(shift, log_phi(x));
  }
  log_phi.array() -= shift;
  log_hat.array() += shift;

  const Matrix kernel = n_step_kernel(prior, 0, prior.horizon());
  BridgeSolution out;
  out.phihat0 = log_hat.array().exp().matrix();
  out.phiN = log_phi.array().exp().matrix();
  out.phi0 = kernel * out.phiN;
  out.phihatN = kernel.transpose() * out.phihat0;
  out.q0N = sol.q0N;
  out.q0_star = sol.q0N.rowwise().sum();
  out.qN_star = sol.q0N.colwise().sum().transpose();
  out.iterations = d.iterations;
  out.final_gap = d.grad_norm;
  out.kl_value = kl_divergence(sol.q0N, endpoint_joint(prior));
  return out;
}

}  // namespace sbridge
