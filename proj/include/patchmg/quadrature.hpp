#pragma once

#include <vector>

namespace patchmg {

/// Gauss-Legendre rule on [0,1].  Exact for polynomials of degree 2*points-1.
struct QuadratureRule {
  std::vector<double> nodes;    // in (0,1)
  std::vector<double> weights;  // sum to 1
};

/// Rule with the given number of points (>= 1).  Nodes/weights are computed
/// once per order and cached.
const QuadratureRule& gauss_legendre(int points);

}  // namespace patchmg
