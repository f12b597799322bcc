#pragma once

#include <vector>

#include "sbridge/common.hpp"

namespace sbridge {

// The known part of an endpoint marginal: a node subset and the mass on it.
// On a proper subset the values are strictly positive and their total is in
// (0, 1). A full-space marginal is an ordinary distribution (zeros allowed)
// summing to 1.
class PartialMarginal {
 public:
  static PartialMarginal on_subset(int state_count, std::vector<int> nodes,
                                   std::vector<double> values);
  static PartialMarginal full(const Vector& distribution);

  int state_count() const { return static_cast<int>(dense_.size()); }
  // Sorted subset.
  const std::vector<int>& nodes() const { return nodes_; }
  bool contains(int x) const { return in_[static_cast<std::size_t>(x)]; }
  // rho(x) on the subset, 0 elsewhere.
  double value(int x) const { return dense_(x); }
  const Vector& dense() const { return dense_; }
  double mass() const { return mass_; }
  bool is_full() const { return static_cast<int>(nodes_.size()) == state_count(); }

 private:
  std::vector<int> nodes_;
  std::vector<bool> in_;
  Vector dense_;
  double mass_ = 0.0;
};

}  // namespace sbridge
