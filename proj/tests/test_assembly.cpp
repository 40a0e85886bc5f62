#include <doctest.h>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cmath>
#include <random>

#include "patchmg/assembly.hpp"
#include "patchmg/errors.hpp"
#include "patchmg/quadrature.hpp"
#include "patchmg/topology.hpp"

using namespace patchmg;

namespace {

Eigen::VectorXd vec2(double x, double y) {
  Eigen::VectorXd v(2);
  v << x, y;
  return v;
}

Eigen::MatrixXd kron(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  Eigen::MatrixXd out(A.rows() * B.rows(), A.cols() * B.cols());
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < A.cols(); ++j)
      out.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return out;
}

MultiPatchDomain unit_square(SideTag tag) {
  MultiPatchDomain d;
  d.dim = 2;
  d.patches.push_back(GeometryMap::axis_aligned_box(vec2(0, 0), vec2(1, 1)));
  d.side_tags.assign(1, {tag, tag, tag, tag, tag, tag});
  build_topology(d);
  return d;
}

/// Value of the discrete solution at a physical parameter point of a patch.
double solution_value(const DofMapper& map, const Eigen::VectorXd& u, int patch,
                      const Eigen::VectorXd& param) {
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

/// L2 error of the discrete solution against an exact field, quadrature with
/// p+2 points per direction.
double l2_error(const DofMapper& map, const Eigen::VectorXd& u,
                const std::function<double(const Eigen::VectorXd&)>& exact) {
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

}  // namespace

TEST_CASE("unit square stiffness is the tensor-product sum") {
  for (int p : {1, 2, 3}) {
    MultiPatchDomain d = unit_square(SideTag::dirichlet);
    DofMapper map(d, p, 4);
    MultiPatchOperator A = assemble_stiffness(map);
    Eigen::MatrixXd dense = Eigen::MatrixXd(A.assemble_global());

    UnivariateSpace s(p, 4, EndCondition::eliminated, EndCondition::eliminated);
    Eigen::MatrixXd K = univariate_stiffness(s).to_dense();
    Eigen::MatrixXd M = univariate_mass(s).to_dense();
    Eigen::MatrixXd oracle = kron(M, K) + kron(K, M);  // slow factor acts on y

    REQUIRE(dense.rows() == oracle.rows());
    CHECK((dense - oracle).lpNorm<Eigen::Infinity>() <
          1e-12 * oracle.lpNorm<Eigen::Infinity>());
  }
}

TEST_CASE("anisotropic box rescales the tensor factors") {
  // G = diag(2,1): coefficient |detJ| J^-1 J^-T = diag(1/2, 2)
  MultiPatchDomain d;
  d.dim = 2;
  d.patches.push_back(GeometryMap::axis_aligned_box(vec2(0, 0), vec2(2, 1)));
  d.side_tags.assign(1, {SideTag::dirichlet, SideTag::dirichlet, SideTag::dirichlet,
                         SideTag::dirichlet, SideTag::dirichlet, SideTag::dirichlet});
  build_topology(d);
  DofMapper map(d, 2, 4);
  Eigen::MatrixXd dense = Eigen::MatrixXd(assemble_stiffness(map).assemble_global());

  UnivariateSpace s(2, 4, EndCondition::eliminated, EndCondition::eliminated);
  Eigen::MatrixXd K = univariate_stiffness(s).to_dense();
  Eigen::MatrixXd M = univariate_mass(s).to_dense();
  Eigen::MatrixXd oracle = 0.5 * kron(M, K) + 2.0 * kron(K, M);
  CHECK((dense - oracle).lpNorm<Eigen::Infinity>() < 1e-12 * oracle.lpNorm<Eigen::Infinity>());
}

TEST_CASE("unit cube stiffness is the 3D tensor-product sum") {
  MultiPatchDomain d;
  d.dim = 3;
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(3), one = Eigen::VectorXd::Ones(3);
  d.patches.push_back(GeometryMap::axis_aligned_box(zero, one));
  d.side_tags.assign(1, {SideTag::dirichlet, SideTag::dirichlet, SideTag::dirichlet,
                         SideTag::dirichlet, SideTag::dirichlet, SideTag::dirichlet});
  build_topology(d);
  DofMapper map(d, 2, 2);
  Eigen::MatrixXd dense = Eigen::MatrixXd(assemble_stiffness(map).assemble_global());

  UnivariateSpace s(2, 2, EndCondition::eliminated, EndCondition::eliminated);
  Eigen::MatrixXd K = univariate_stiffness(s).to_dense();
  Eigen::MatrixXd M = univariate_mass(s).to_dense();
  Eigen::MatrixXd oracle = kron(kron(M, M), K) + kron(kron(M, K), M) + kron(kron(K, M), M);
  CHECK((dense - oracle).lpNorm<Eigen::Infinity>() < 1e-12 * oracle.lpNorm<Eigen::Infinity>());
}

TEST_CASE("free-boundary stiffness annihilates constants") {
  MultiPatchDomain d = unit_square(SideTag::neumann);
  DofMapper map(d, 3, 3);
  MultiPatchOperator A = assemble_stiffness(map);
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(map.num_dofs());
  CHECK(A.apply(ones).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("scattered apply equals the assembled matrix and is symmetric") {
  MultiPatchDomain d;
  d.dim = 2;
  d.patches.push_back(GeometryMap::axis_aligned_box(vec2(0, 0), vec2(1, 1)));
  d.patches.push_back(GeometryMap::axis_aligned_box(vec2(1, 0), vec2(1, 1)));
  auto N = SideTag::neumann, D = SideTag::dirichlet;
  d.side_tags.assign(2, {N, N, D, N, N, N});
  build_topology(d);
  DofMapper map(d, 2, 3);
  MultiPatchOperator A = assemble_stiffness(map);
  Eigen::SparseMatrix<double> S = A.assemble_global();

  std::mt19937 rng(21);
  std::normal_distribution<double> gauss;
  for (int t = 0; t < 5; ++t) {
    Eigen::VectorXd x(map.num_dofs()), y(map.num_dofs());
    for (int i = 0; i < x.size(); ++i) {
      x[i] = gauss(rng);
      y[i] = gauss(rng);
    }
    Eigen::VectorXd ax = A.apply(x);
    CHECK((ax - S * x).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK(x.dot(A.apply(y)) == doctest::Approx(y.dot(ax)).epsilon(1e-12));
  }

  // curved patches keep the operator positive definite on dirichlet spaces
  Eigen::MatrixXd dense = Eigen::MatrixXd(S);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense);
  CHECK(es.eigenvalues()(0) > 0.0);
}

TEST_CASE("load vector: frozen hat integrals and finer-quadrature oracle") {
  MultiPatchDomain d = unit_square(SideTag::neumann);
  DofMapper map1(d, 1, 1);
  Eigen::VectorXd r = assemble_rhs(map1, [](const Eigen::VectorXd&) { return 1.0; });
  REQUIRE(r.size() == 4);
  for (int i = 0; i < 4; ++i) CHECK(r[i] == doctest::Approx(0.25));

  // polynomial source against an independent high-order quadrature loop
  DofMapper map(d, 2, 3);
  auto f = [](const Eigen::VectorXd& x) { return x[0] * x[0] * x[1] + 0.5 * x[1]; };
  Eigen::VectorXd rhs = assemble_rhs(map, f);

  const auto& rule = gauss_legendre(8);
  Eigen::VectorXd oracle = Eigen::VectorXd::Zero(map.num_dofs());
  UnivariateSpace space(2, 3);
  for (int ey = 0; ey < 3; ++ey)
    for (int ex = 0; ex < 3; ++ex)
      for (std::size_t qy = 0; qy < rule.nodes.size(); ++qy)
        for (std::size_t qx = 0; qx < rule.nodes.size(); ++qx) {
          double x = (ex + rule.nodes[qx]) / 3.0, y = (ey + rule.nodes[qy]) / 3.0;
          double w = rule.weights[qx] * rule.weights[qy] / 9.0;
          BasisEval bx = eval_basis(space, x), by = eval_basis(space, y);
          for (int b = 0; b <= 2; ++b)
            for (int a = 0; a <= 2; ++a) {
              std::int32_t g = map.global_of(
                  0, map.flat_of(0, {bx.first_index + a, by.first_index + b}));
              if (g >= 0) oracle[g] += w * bx.values[a] * by.values[b] * f(vec2(x, y));
            }
        }
  CHECK((rhs - oracle).lpNorm<Eigen::Infinity>() < 1e-13);
}

TEST_CASE("poisson solve converges at the expected rate on one patch") {
  const double pi = std::acos(-1.0);
  auto exact = [&](const Eigen::VectorXd& x) {
    return std::sin(pi * x[0]) * std::sin(pi * x[1]);
  };
  auto source = [&](const Eigen::VectorXd& x) { return 2 * pi * pi * exact(x); };

  double prev = 0.0;
  for (int p : {2}) {
    for (int n : {4, 8}) {
      MultiPatchDomain d = unit_square(SideTag::dirichlet);
      DofMapper map(d, p, n);
      Eigen::SparseMatrix<double> A = assemble_stiffness(map).assemble_global();
      Eigen::VectorXd b = assemble_rhs(map, source);
      Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(A);
      REQUIRE(llt.info() == Eigen::Success);
      Eigen::VectorXd u = llt.solve(b);
      double err = l2_error(map, u, exact);
      if (n == 8) {
        CHECK(err < 1e-3);
        CHECK(prev / err > 6.0);  // L2 rate p+1 = 3 gives a factor of 8
      }
      prev = err;
    }
  }
}

TEST_CASE("poisson solve couples patches through the interface") {
  const double pi = std::acos(-1.0);
  // domain (0,2)x(0,1), zero trace on the whole boundary
  auto exact = [&](const Eigen::VectorXd& x) {
    return std::sin(pi * x[0] / 2) * std::sin(pi * x[1]);
  };
  auto source = [&](const Eigen::VectorXd& x) { return 1.25 * pi * pi * exact(x); };

  MultiPatchDomain d;
  d.dim = 2;
  d.patches.push_back(GeometryMap::axis_aligned_box(vec2(0, 0), vec2(1, 1)));
  d.patches.push_back(GeometryMap::axis_aligned_box(vec2(1, 0), vec2(1, 1)));
  d.side_tags.assign(2, {SideTag::dirichlet, SideTag::dirichlet, SideTag::dirichlet,
                         SideTag::dirichlet, SideTag::dirichlet, SideTag::dirichlet});
  build_topology(d);

  double prev = 0.0;
  for (int n : {4, 8}) {
    DofMapper map(d, 2, n);
    Eigen::SparseMatrix<double> A = assemble_stiffness(map).assemble_global();
    Eigen::VectorXd b = assemble_rhs(map, source);
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(A);
    REQUIRE(llt.info() == Eigen::Success);
    Eigen::VectorXd u = llt.solve(b);
    double err = l2_error(map, u, exact);
    if (n == 8) {
      CHECK(err < 2e-3);
      CHECK(prev / err > 6.0);
    }
    prev = err;
  }
}

TEST_CASE("degenerate geometry is rejected") {
  // folded (bowtie) quadrilateral: jacobian determinant changes sign inside
  std::vector<UnivariateSpace> sp = {UnivariateSpace(1, 1), UnivariateSpace(1, 1)};
  Eigen::MatrixXd ctrl(4, 2);
  ctrl << 0, 0, 1, 0, 1, 1, 0, 1;  // top corners swapped relative to the bottom
  MultiPatchDomain d;
  d.dim = 2;
  d.patches.push_back(GeometryMap(sp, ctrl));
  d.side_tags.assign(1, {SideTag::dirichlet, SideTag::dirichlet, SideTag::dirichlet,
                         SideTag::dirichlet, SideTag::dirichlet, SideTag::dirichlet});
  d.geometric_tolerance = 1e-8;
  DofMapper map(d, 2, 2);
  CHECK_THROWS_AS(assemble_stiffness(map), SingularGeometryError);
}
