#pragma once

#include "sbridge/common.hpp"

namespace sbridge {

// Hilbert projective distance log(max x/y / min x/y) on the nonnegative
// orthant. Indices where both entries vanish are ignored; an index where
// exactly one vanishes makes the distance +inf. Throws on a zero vector or a
// size mismatch.
double hilbert_distance(const Vector& x, const Vector& y);

// Same metric for vectors given by their logarithms (-inf for zero entries).
double hilbert_distance_log(const Vector& log_x, const Vector& log_y);

}  // namespace sbridge
