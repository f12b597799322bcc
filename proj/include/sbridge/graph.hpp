#pragma once

#include <cstdint>
#include <vector>

#include "sbridge/common.hpp"

namespace sbridge {

// Nodes are 0-based throughout the library; the JSON/CLI layer converts to
// and from the 1-based labels used in input files.
struct Edge {
  int from = 0;
  int to = 0;
  double length = 1.0;
};

using Path = std::vector<int>;
using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

// Immutable directed graph. Edges are kept sorted by (from, to).
class Graph {
 public:
  int size() const { return n_; }
  const std::vector<Edge>& edges() const { return edges_; }
  // 0/1 adjacency.
  const Matrix& adjacency() const { return adjacency_; }
  // Edge lengths, +inf where there is no edge.
  const Matrix& lengths() const { return lengths_; }
  bool has_edge(int from, int to) const { return adjacency_(from, to) != 0.0; }
  std::vector<int> successors(int node) const;

 private:
  friend Graph build_graph(int n, std::vector<Edge> edges);
  int n_ = 0;
  std::vector<Edge> edges_;
  Matrix adjacency_;
  Matrix lengths_;
};

// Throws kInvalidInput on n < 2, out-of-range endpoints, duplicate edges or
// non-positive lengths.
Graph build_graph(int n, std::vector<Edge> edges);

bool is_strongly_connected(const Graph& g);

// Entry (i, j) is the number of walks with t edges from i to j, i.e. (A^t)_ij.
CountMatrix count_paths(const Graph& g, int t);

inline constexpr std::size_t kMaxEnumeratedPaths = 1000000;

// All walks with `length` edges from `from` to `to`, in lexicographic order.
// Throws kInvalidInput when more than kMaxEnumeratedPaths would be produced.
std::vector<Path> enumerate_paths(const Graph& g, int from, int to, int length);

// Index of imprimitivity of a strongly connected graph (1 = aperiodic).
int period(const Graph& g);

struct PerronResult {
  double spectral_radius = 0.0;
  Vector left;   // u, strictly positive
  Vector right;  // v, strictly positive, u.v = 1
  int iterations = 0;
  int period = 1;
  double right_residual = 0.0;
  double left_residual = 0.0;
};

// Perron root and eigenvectors by power iteration on A + I, which has the
// same eigenvectors and is primitive even when A is periodic.
PerronResult perron(const Graph& g, double tol = 1e-12, int max_iter = 1000000);

// log of the spectral radius of A.
double topological_entropy(const Graph& g);

}  // namespace sbridge
