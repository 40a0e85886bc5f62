#pragma once

// shared helpers for the test binaries

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

#include "patchmg/geometry.hpp"
#include "patchmg/quadrature.hpp"
#include "patchmg/spline.hpp"
#include "patchmg/topology.hpp"

namespace testutil {

inline Eigen::VectorXd vec2(double x, double y) {
  Eigen::VectorXd v(2);
  v << x, y;
  return v;
}

inline Eigen::VectorXd vec3(double x, double y, double z) {
  Eigen::VectorXd v(3);
  v << x, y, z;
  return v;
}

inline Eigen::MatrixXd kron(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  Eigen::MatrixXd out(A.rows() * B.rows(), A.cols() * B.cols());
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < A.cols(); ++j)
      out.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return out;
}

inline patchmg::MultiPatchDomain unit_square(patchmg::SideTag tag) {
  patchmg::MultiPatchDomain d;
  d.dim = 2;
  d.patches.push_back(patchmg::GeometryMap::axis_aligned_box(vec2(0, 0), vec2(1, 1)));
  d.side_tags.assign(1, {tag, tag, tag, tag, tag, tag});
  patchmg::build_topology(d);
  return d;
}

inline patchmg::MultiPatchDomain two_squares(patchmg::SideTag outer) {
  patchmg::MultiPatchDomain d;
  d.dim = 2;
  d.patches.push_back(patchmg::GeometryMap::axis_aligned_box(vec2(0, 0), vec2(1, 1)));
  d.patches.push_back(patchmg::GeometryMap::axis_aligned_box(vec2(1, 0), vec2(1, 1)));
  d.side_tags.assign(2, {outer, outer, outer, outer, outer, outer});
  patchmg::build_topology(d);
  return d;
}

/// Same two squares with the right patch's parametrization flipped in y, so
/// the interface carries a non-trivial orientation.
inline patchmg::MultiPatchDomain two_squares_flipped(patchmg::SideTag outer) {
  patchmg::MultiPatchDomain d;
  d.dim = 2;
  d.patches.push_back(patchmg::GeometryMap::axis_aligned_box(vec2(0, 0), vec2(1, 1)));
  patchmg::GeometryMap right = patchmg::GeometryMap::axis_aligned_box(vec2(1, 0), vec2(1, 1));
  Eigen::MatrixXd ctrl = right.control_points();
  Eigen::MatrixXd flipped = ctrl;
  flipped.row(0) = ctrl.row(2);
  flipped.row(1) = ctrl.row(3);
  flipped.row(2) = ctrl.row(0);
  flipped.row(3) = ctrl.row(1);
  d.patches.push_back(patchmg::GeometryMap(right.spaces(), flipped));
  d.side_tags.assign(2, {outer, outer, outer, outer, outer, outer});
  patchmg::build_topology(d);
  return d;
}

/// kx-by-ky grid of unit squares, outer boundary dirichlet.
inline patchmg::MultiPatchDomain unit_grid(int kx, int ky) {
  using patchmg::SideTag;
  patchmg::MultiPatchDomain d;
  d.dim = 2;
  for (int j = 0; j < ky; ++j)
    for (int i = 0; i < kx; ++i)
      d.patches.push_back(patchmg::GeometryMap::axis_aligned_box(vec2(i, j), vec2(1, 1)));
  auto D = SideTag::dirichlet;
  d.side_tags.assign(d.patches.size(), {D, D, D, D, D, D});
  patchmg::build_topology(d);
  return d;
}

/// L-shaped domain (0,2)^2 minus [1,2)^2; {xy=0} dirichlet, rest neumann.
inline patchmg::MultiPatchDomain lshape() {
  using patchmg::SideTag;
  patchmg::MultiPatchDomain d;
  d.dim = 2;
  d.patches.push_back(patchmg::GeometryMap::axis_aligned_box(vec2(0, 0), vec2(1, 1)));
  d.patches.push_back(patchmg::GeometryMap::axis_aligned_box(vec2(1, 0), vec2(1, 1)));
  d.patches.push_back(patchmg::GeometryMap::axis_aligned_box(vec2(0, 1), vec2(1, 1)));
  auto N = SideTag::neumann, D = SideTag::dirichlet;
  d.side_tags.assign(3, {N, N, N, N, N, N});
  d.side_tags[0] = {D, N, D, N, N, N};
  d.side_tags[1] = {N, N, D, N, N, N};
  d.side_tags[2] = {D, N, N, N, N, N};
  patchmg::build_topology(d);
  return d;
}

/// Fichera-type corner (0,2)^3 minus [1,2)^3; {xyz=0} dirichlet, rest neumann.
inline patchmg::MultiPatchDomain fichera() {
  using patchmg::SideTag;
  patchmg::MultiPatchDomain d;
  d.dim = 3;
  for (int cz = 0; cz < 2; ++cz)
    for (int cy = 0; cy < 2; ++cy)
      for (int cx = 0; cx < 2; ++cx) {
        if (cx == 1 && cy == 1 && cz == 1) continue;
        d.patches.push_back(patchmg::GeometryMap::axis_aligned_box(vec3(cx, cy, cz), vec3(1, 1, 1)));
      }
  auto N = SideTag::neumann, D = SideTag::dirichlet;
  for (const auto& g : d.patches) {
    std::array<SideTag, 6> t = {N, N, N, N, N, N};
    for (int a = 0; a < 3; ++a)
      if (g.control_points()(0, a) == 0.0) t[patchmg::side_of(a, 0)] = D;
    d.side_tags.push_back(t);
  }
  patchmg::build_topology(d);
  return d;
}

/// Discrete solution value at a parameter point of a patch.
inline double solution_value(const patchmg::DofMapper& map, const Eigen::VectorXd& u, int patch,
                             const Eigen::VectorXd& param) {
  using namespace patchmg;
  const int d = map.domain().dim;
  const int p = map.degree();
  UnivariateSpace space(p, map.elements());
  std::vector<BasisEval> ev(d);
  for (int a = 0; a < d; ++a) ev[a] = eval_basis(space, param[a]);
  std::vector<int> li(d, 0);
  double val = 0.0;
  for (;;) {
    double w = 1.0;
    std::vector<int> idx(d);
    for (int a = 0; a < d; ++a) {
      w *= ev[a].values[li[a]];
      idx[a] = ev[a].first_index + li[a];
    }
    std::int32_t g = map.global_of(patch, map.flat_of(patch, idx));
    if (g >= 0) val += u[g] * w;
    int a = 0;
    for (; a < d; ++a) {
      if (++li[a] <= p) break;
      li[a] = 0;
    }
    if (a == d) break;
  }
  return val;
}

/// L2 error against an exact field, quadrature with p+2 points per direction.
inline double l2_error(const patchmg::DofMapper& map, const Eigen::VectorXd& u,
                       const std::function<double(const Eigen::VectorXd&)>& exact) {
  using namespace patchmg;
  const MultiPatchDomain& dom = map.domain();
  const int d = dom.dim;
  const int n = map.elements();
  const QuadratureRule& rule = gauss_legendre(map.degree() + 2);
  double err2 = 0.0;
  Eigen::VectorXd param(d);
  for (int k = 0; k < dom.num_patches(); ++k) {
    std::vector<int> ecell(d, 0);
    std::int64_t ecount = 1;
    for (int a = 0; a < d; ++a) ecount *= n;
    for (std::int64_t e = 0; e < ecount; ++e) {
      std::vector<int> qidx(d, 0);
      std::int64_t nq = 1;
      for (int a = 0; a < d; ++a) nq *= rule.nodes.size();
      for (std::int64_t q = 0; q < nq; ++q) {
        double w = 1.0;
        for (int a = 0; a < d; ++a) {
          param[a] = (ecell[a] + rule.nodes[qidx[a]]) / n;
          w *= rule.weights[qidx[a]] / n;
        }
        double det = std::abs(dom.patches[k].jacobian(param).determinant());
        double diff = solution_value(map, u, k, param) - exact(dom.patches[k].eval(param));
        err2 += w * det * diff * diff;
        for (int a = 0; a < d; ++a) {
          if (++qidx[a] < int(rule.nodes.size())) break;
          qidx[a] = 0;
        }
      }
      for (int a = 0; a < d; ++a) {
        if (++ecell[a] < n) break;
        ecell[a] = 0;
      }
    }
  }
  return std::sqrt(err2);
}

}  // namespace testutil
