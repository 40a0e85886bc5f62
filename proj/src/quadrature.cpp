#include "patchmg/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include "patchmg/errors.hpp"

namespace patchmg {

namespace {

// Legendre polynomial P_n and derivative at x, by the three-term recurrence.
std::pair<double, double> legendre(int n, double x) {
  double p0 = 1.0, p1 = x;
  for (int k = 2; k <= n; ++k) {
    double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  double dp = n * (x * p1 - p0) / (x * x - 1.0);
  return {p1, dp};
}

QuadratureRule compute_rule(int q) {
  QuadratureRule rule;
  rule.nodes.resize(q);
  rule.weights.resize(q);
  for (int i = 0; i < q; ++i) {
    // Chebyshev initial guess for the i-th root of P_q on (-1,1).
    double x = std::cos(M_PI * (i + 0.75) / (q + 0.5));
    for (int it = 0; it < 100; ++it) {
      auto [p, dp] = legendre(q, x);
      double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    auto [p, dp] = legendre(q, x);
    (void)p;
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    // map [-1,1] -> [0,1]; roots come out in descending order, store ascending
    rule.nodes[q - 1 - i] = 0.5 * (x + 1.0);
    rule.weights[q - 1 - i] = 0.5 * w;
  }
  return rule;
}

}  // namespace

const QuadratureRule& gauss_legendre(int points) {
  if (points < 1 || points > 64) throw DomainError("gauss_legendre: order out of range");
  static std::map<int, QuadratureRule> cache;
  static std::mutex mtx;
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find(points);
  if (it == cache.end()) it = cache.emplace(points, compute_rule(points)).first;
  return it->second;
}

}  // namespace patchmg
