#include "sbridge/marginal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace sbridge {

namespace {
constexpr double kMassTol = 1e-10;
}

PartialMarginal PartialMarginal::on_subset(int state_count, std::vector<int> nodes,
                                           std::vector<double> values) {
  if (state_count < 1) invalid_input("marginal needs a positive state count");
  if (nodes.size() != values.size()) invalid_input("marginal nodes/values length mismatch");
  if (nodes.empty()) invalid_input("marginal subset is empty");

  PartialMarginal m;
  m.in_.assign(static_cast<std::size_t>(state_count), false);
  m.dense_ = Vector::Zero(state_count);
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const int x = nodes[k];
    if (x < 0 || x >= state_count) {
      invalid_input("marginal node " + std::to_string(x + 1) + " out of range");
    }
    if (m.in_[static_cast<std::size_t>(x)]) {
      invalid_input("marginal node " + std::to_string(x + 1) + " repeated");
    }
    if (!std::isfinite(values[k]) || values[k] < 0.0) {
      invalid_input("marginal value at node " + std::to_string(x + 1) + " is not a valid mass");
    }
    m.in_[static_cast<std::size_t>(x)] = true;
    m.dense_(x) = values[k];
  }
  std::sort(nodes.begin(), nodes.end());
  m.nodes_ = std::move(nodes);
  m.mass_ = m.dense_.sum();

  if (m.is_full()) {
    if (std::abs(m.mass_ - 1.0) > kMassTol) {
      invalid_input("a marginal given on every node must sum to 1");
    }
  } else {
    for (int x : m.nodes_) {
      if (!(m.dense_(x) > 0.0)) {
        invalid_input("partial marginal must be positive on its subset (node " +
                      std::to_string(x + 1) + ")");
      }
    }
    if (!(m.mass_ < 1.0)) {
      invalid_input("partial marginal on a proper subset must have total mass below 1");
    }
  }
  return m;
}

PartialMarginal PartialMarginal::full(const Vector& distribution) {
  const int n = static_cast<int>(distribution.size());
  std::vector<int> nodes(static_cast<std::size_t>(n));
  std::iota(nodes.begin(), nodes.end(), 0);
  return on_subset(n, std::move(nodes),
                   std::vector<double>(distribution.data(), distribution.data() + n));
}

}  // namespace sbridge
