#include "sbridge/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <string>

namespace sbridge {

std::vector<int> Graph::successors(int node) const {
  std::vector<int> out;
  for (int j = 0; j < n_; ++j) {
    if (adjacency_(node, j) != 0.0) out.push_back(j);
  }
  return out;
}

Graph build_graph(int n, std::vector<Edge> edges) {
  if (n < 2) invalid_input("graph needs at least 2 nodes, got " + std::to_string(n));
  Graph g;
  g.n_ = n;
  g.adjacency_ = Matrix::Zero(n, n);
  g.lengths_ = Matrix::Constant(n, n, kInf);
  for (const Edge& e : edges) {
    if (e.from < 0 || e.from >= n || e.to < 0 || e.to >= n) {
      invalid_input("edge (" + std::to_string(e.from + 1) + "," +
                    std::to_string(e.to + 1) + ") has a node outside 1.." +
                    std::to_string(n));
    }
    if (!(e.length > 0.0) || !std::isfinite(e.length)) {
      invalid_input("edge (" + std::to_string(e.from + 1) + "," +
                    std::to_string(e.to + 1) + ") needs a positive finite length");
    }
    if (g.adjacency_(e.from, e.to) != 0.0) {
      invalid_input("duplicate edge (" + std::to_string(e.from + 1) + "," +
                    std::to_string(e.to + 1) + ")");
    }
    g.adjacency_(e.from, e.to) = 1.0;
    g.lengths_(e.from, e.to) = e.length;
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    return a.from != b.from ? a.from < b.from : a.to < b.to;
  });
  g.edges_ = std::move(edges);
  return g;
}

namespace {

std::vector<bool> reachable_from(const Graph& g, int start, bool reverse) {
  const int n = g.size();
  std::vector<bool> seen(n, false);
  std::queue<int> todo;
  seen[start] = true;
  todo.push(start);
  while (!todo.empty()) {
    const int u = todo.front();
    todo.pop();
    for (int v = 0; v < n; ++v) {
      const bool edge = reverse ? g.has_edge(v, u) : g.has_edge(u, v);
      if (edge && !seen[v]) {
        seen[v] = true;
        todo.push(v);
      }
    }
  }
  return seen;
}

}  // namespace

bool is_strongly_connected(const Graph& g) {
  const auto fwd = reachable_from(g, 0, false);
  const auto bwd = reachable_from(g, 0, true);
  return std::all_of(fwd.begin(), fwd.end(), [](bool b) { return b; }) &&
         std::all_of(bwd.begin(), bwd.end(), [](bool b) { return b; });
}

CountMatrix count_paths(const Graph& g, int t) {
  if (t < 0) invalid_input("path length must be nonnegative");
  const int n = g.size();
  const CountMatrix a = g.adjacency().cast<std::int64_t>();
  CountMatrix result = CountMatrix::Identity(n, n);
  for (int k = 0; k < t; ++k) result = result * a;
  return result;
}

std::vector<Path> enumerate_paths(const Graph& g, int from, int to, int length) {
  const int n = g.size();
  if (from < 0 || from >= n || to < 0 || to >= n) invalid_input("node out of range");
  if (length < 1) invalid_input("path length must be at least 1");

  // Prune with walk counts so the search only visits prefixes that finish.
  std::vector<CountMatrix> counts;
  counts.reserve(length + 1);
  for (int k = 0; k <= length; ++k) counts.push_back(count_paths(g, k));
  if (static_cast<std::uint64_t>(counts[length](from, to)) > kMaxEnumeratedPaths) {
    invalid_input("more than 10^6 paths to enumerate");
  }

  std::vector<Path> out;
  Path current{from};
  auto extend = [&](auto&& self, int node, int remaining) -> void {
    if (remaining == 0) {
      if (node == to) out.push_back(current);
      return;
    }
    for (int next = 0; next < n; ++next) {
      if (!g.has_edge(node, next) || counts[remaining - 1](next, to) == 0) continue;
      current.push_back(next);
      self(self, next, remaining - 1);
      current.pop_back();
    }
  };
  extend(extend, from, length);
  return out;
}

int period(const Graph& g) {
  const int n = g.size();
  std::vector<int> level(n, -1);
  std::queue<int> todo;
  level[0] = 0;
  todo.push(0);
  while (!todo.empty()) {
    const int u = todo.front();
    todo.pop();
    for (int v = 0; v < n; ++v) {
      if (g.has_edge(u, v) && level[v] < 0) {
        level[v] = level[u] + 1;
        todo.push(v);
      }
    }
  }
  int d = 0;
  for (const Edge& e : g.edges()) {
    if (level[e.from] < 0 || level[e.to] < 0) continue;
    d = std::gcd(d, std::abs(level[e.from] + 1 - level[e.to]));
  }
  return d == 0 ? 1 : d;
}

namespace {

// Power iteration for the dominant eigenvector of B = M + I, where M is
// irreducible and nonnegative. Returns the eigenvector normalized to unit
// max-norm and the eigenvalue of M.
struct PowerResult {
  Vector vec;
  double value = 0.0;
  double residual = kInf;
  int iterations = 0;
};

PowerResult power_iterate(const Matrix& m, double tol, int max_iter) {
  const Eigen::Index n = m.rows();
  PowerResult r;
  r.vec = Vector::Ones(n);
  for (int it = 1; it <= max_iter; ++it) {
    const Vector mv = m * r.vec;
    const Vector next = mv + r.vec;
    const double scale = next.maxCoeff();
    r.value = mv.dot(r.vec) / r.vec.squaredNorm();
    r.residual = (mv - r.value * r.vec).lpNorm<Eigen::Infinity>();
    r.iterations = it;
    if (r.residual < tol) return r;
    r.vec = next / scale;
  }
  return r;
}

}  // namespace

PerronResult perron(const Graph& g, double tol, int max_iter) {
  if (!is_strongly_connected(g)) {
    invalid_input("Perron eigenvectors need a strongly connected graph");
  }
  const Matrix& a = g.adjacency();
  const PowerResult right = power_iterate(a, tol, max_iter);
  const PowerResult left = power_iterate(a.transpose(), tol, max_iter);
  if (right.residual >= tol || left.residual >= tol) {
    throw SolverError(ErrorKind::kNonConvergence,
                      "power iteration did not reach the eigen-residual tolerance",
                      std::max(right.iterations, left.iterations),
                      std::max(right.residual, left.residual));
  }

  PerronResult out;
  out.spectral_radius = 0.5 * (right.value + left.value);
  out.right = right.vec / right.vec.norm();
  out.left = left.vec / left.vec.dot(out.right);
  out.iterations = std::max(right.iterations, left.iterations);
  out.period = period(g);
  out.right_residual =
      (a * out.right - out.spectral_radius * out.right).lpNorm<Eigen::Infinity>();
  out.left_residual = (a.transpose() * out.left - out.spectral_radius * out.left)
                          .lpNorm<Eigen::Infinity>();
  return out;
}

double topological_entropy(const Graph& g) { return std::log(perron(g).spectral_radius); }

}  // namespace sbridge
