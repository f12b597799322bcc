#include "sbridge/hilbert.hpp"

#include <algorithm>
#include <cmath>

namespace sbridge {

double hilbert_distance_log(const Vector& log_x, const Vector& log_y) {
  if (log_x.size() != log_y.size()) invalid_input("hilbert_distance: size mismatch");
  double hi = -kInf;
  double lo = kInf;
  bool any_x = false;
  bool any_y = false;
  for (Eigen::Index i = 0; i < log_x.size(); ++i) {
    const bool zx = log_x(i) == -kInf;
    const bool zy = log_y(i) == -kInf;
    any_x = any_x || !zx;
    any_y = any_y || !zy;
    if (zx && zy) continue;
    if (zx != zy) {
      hi = kInf;
      continue;
    }
    const double d = log_x(i) - log_y(i);
    hi = std::max(hi, d);
    lo = std::min(lo, d);
  }
  if (!any_x || !any_y) invalid_input("hilbert_distance: zero vector");
  if (hi == kInf) return kInf;
  return std::max(0.0, hi - lo);
}

double hilbert_distance(const Vector& x, const Vector& y) {
  if (x.size() != y.size()) invalid_input("hilbert_distance: size mismatch");
  if ((x.array() < 0.0).any() || (y.array() < 0.0).any()) {
    invalid_input("hilbert_distance: negative entry");
  }
  return hilbert_distance_log(x.array().log().matrix(), y.array().log().matrix());
}

}  // namespace sbridge
