#include "patchmg/spline.hpp"

#include <algorithm>
#include <cmath>

#include "patchmg/errors.hpp"
#include "patchmg/quadrature.hpp"

namespace patchmg {

UnivariateSpace::UnivariateSpace(int degree, int elements, EndCondition left, EndCondition right)
    : degree_(degree), elements_(elements), left_(left), right_(right) {
  if (degree < 1 || degree > kMaxDegree) throw DomainError("UnivariateSpace: degree out of range");
  if (elements < 1) throw DomainError("UnivariateSpace: need at least one element");
}

std::vector<double> UnivariateSpace::knots() const {
  std::vector<double> t;
  t.reserve(2 * (degree_ + 1) + elements_ - 1);
  for (int i = 0; i <= degree_; ++i) t.push_back(0.0);
  for (int e = 1; e < elements_; ++e) t.push_back(double(e) / elements_);
  for (int i = 0; i <= degree_; ++i) t.push_back(1.0);
  return t;
}

BasisEval eval_basis(const UnivariateSpace& space, double x, int deriv) {
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("eval_basis: x outside [0,1]");
  if (deriv < 0 || deriv > 1) throw DomainError("eval_basis: deriv must be 0 or 1");
  const int p = space.degree();
  const int n = space.elements();
  // Element index; x == 1 evaluates in the last element.
  int e = std::min(int(x * n), n - 1);

  // Knot t_{p+i} = i/n clamped to [0,1]; span of x is k = e + p in full knots.
  auto knot = [&](int i) {
    int j = i - p;  // interior index: t = j/n clamped
    return std::clamp(double(j) / n, 0.0, 1.0);
  };
  const int k = e + p;

  // Triangular Cox-de Boor.  N[j] holds B_{k-deg+j,deg}(x) after pass `deg`.
  std::array<double, kMaxDegree + 1> N{}, left{}, right{};
  N[0] = 1.0;
  int top = deriv == 1 ? p - 1 : p;
  for (int deg = 1; deg <= top; ++deg) {
    left[deg] = x - knot(k + 1 - deg);
    right[deg] = knot(k + deg) - x;
    double saved = 0.0;
    for (int r = 0; r < deg; ++r) {
      double denom = right[r + 1] + left[deg - r];
      double tmp = denom != 0.0 ? N[r] / denom : 0.0;
      N[r] = saved + right[r + 1] * tmp;
      saved = left[deg - r] * tmp;
    }
    N[deg] = saved;
  }

  BasisEval out;
  out.first_index = e;
  out.values.fill(0.0);
  if (deriv == 0) {
    for (int j = 0; j <= p; ++j) out.values[j] = N[j];
    return out;
  }
  if (p == 0) return out;
  // B'_{i,p} = p * ( B_{i,p-1}/(t_{i+p}-t_i) - B_{i+1,p-1}/(t_{i+p+1}-t_{i+1}) )
  // with N[] holding the degree p-1 values for functions k-p+1 .. k.
  for (int j = 0; j <= p; ++j) {
    int i = k - p + j;  // full-basis index of output j
    double a = 0.0, b = 0.0;
    if (j >= 1) {
      double denom = knot(i + p) - knot(i);
      if (denom != 0.0) a = N[j - 1] / denom;
    }
    if (j <= p - 1) {
      double denom = knot(i + p + 1) - knot(i + 1);
      if (denom != 0.0) b = N[j] / denom;
    }
    out.values[j] = p * (a - b);
  }
  return out;
}

namespace {

BandedSymMatrix univariate_gram(const UnivariateSpace& space, int deriv) {
  const int p = space.degree();
  const int n = space.elements();
  const auto& rule = gauss_legendre(p + 1);
  BandedSymMatrix m(space.dimension(), p);
  const double h = space.mesh_size();
  for (int e = 0; e < n; ++e) {
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
      double x = (e + rule.nodes[q]) * h;
      BasisEval be = eval_basis(space, x, deriv);
      double w = rule.weights[q] * h;
      for (int a = 0; a <= p; ++a) {
        int ia = space.to_reduced(be.first_index + a);
        if (ia < 0) continue;
        for (int b = 0; b <= a; ++b) {
          int ib = space.to_reduced(be.first_index + b);
          if (ib < 0) continue;
          m.add(ia, ib, w * be.values[a] * be.values[b]);
        }
      }
    }
  }
  return m;
}

}  // namespace

namespace detail {

void insert_knot(std::vector<double>& knots, int p, double u, Eigen::MatrixXd& refine) {
  // span: largest k with knots[k] <= u < knots[k+1]
  int k = int(std::upper_bound(knots.begin(), knots.end(), u) - knots.begin()) - 1;
  const Eigen::Index rows = refine.rows();
  Eigen::MatrixXd out(rows + 1, refine.cols());
  for (Eigen::Index i = 0; i <= rows; ++i) {
    double alpha;
    if (Eigen::Index(i) <= Eigen::Index(k) - p)
      alpha = 1.0;
    else if (i > Eigen::Index(k))
      alpha = 0.0;
    else
      alpha = (u - knots[i]) / (knots[i + p] - knots[i]);
    if (alpha == 1.0)
      out.row(i) = refine.row(i);
    else if (alpha == 0.0)
      out.row(i) = refine.row(i - 1);
    else
      out.row(i) = alpha * refine.row(i) + (1.0 - alpha) * refine.row(i - 1);
  }
  knots.insert(std::upper_bound(knots.begin(), knots.end(), u), u);
  refine = std::move(out);
}

}  // namespace detail

BandedSymMatrix univariate_mass(const UnivariateSpace& space) { return univariate_gram(space, 0); }

BandedSymMatrix univariate_stiffness(const UnivariateSpace& space) {
  return univariate_gram(space, 1);
}

Eigen::MatrixXd TwoScaleMatrix::to_dense() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(fine_dim, coarse_dim);
  for (int i = 0; i < fine_dim; ++i)
    for (std::size_t k = 0; k < row_vals[i].size(); ++k) m(i, row_start[i] + k) = row_vals[i][k];
  return m;
}

Eigen::VectorXd TwoScaleMatrix::apply(const Eigen::VectorXd& coarse) const {
  Eigen::VectorXd fine = Eigen::VectorXd::Zero(fine_dim);
  for (int i = 0; i < fine_dim; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < row_vals[i].size(); ++k) s += row_vals[i][k] * coarse[row_start[i] + k];
    fine[i] = s;
  }
  return fine;
}

Eigen::VectorXd TwoScaleMatrix::apply_transpose(const Eigen::VectorXd& fine) const {
  Eigen::VectorXd coarse = Eigen::VectorXd::Zero(coarse_dim);
  for (int i = 0; i < fine_dim; ++i)
    for (std::size_t k = 0; k < row_vals[i].size(); ++k)
      coarse[row_start[i] + k] += row_vals[i][k] * fine[i];
  return coarse;
}

TwoScaleMatrix two_scale_matrix(const UnivariateSpace& coarse) {
  const int p = coarse.degree();
  const int n = coarse.elements();
  std::vector<double> knots = coarse.knots();
  Eigen::MatrixXd refine = Eigen::MatrixXd::Identity(coarse.full_dimension(), coarse.full_dimension());
  for (int e = 0; e < n; ++e) detail::insert_knot(knots, p, (e + 0.5) / n, refine);

  UnivariateSpace fine(p, 2 * n, coarse.left(), coarse.right());
  TwoScaleMatrix out;
  out.fine_dim = fine.dimension();
  out.coarse_dim = coarse.dimension();
  out.row_start.resize(out.fine_dim);
  out.row_vals.resize(out.fine_dim);
  const int fshift = fine.first_active();
  const int cshift = coarse.first_active();
  for (int i = 0; i < out.fine_dim; ++i) {
    int lo = -1, hi = -1;
    for (int j = 0; j < out.coarse_dim; ++j) {
      if (refine(i + fshift, j + cshift) != 0.0) {
        if (lo < 0) lo = j;
        hi = j;
      }
    }
    if (lo < 0) {  // all-zero row: coarse space is empty
      out.row_start[i] = 0;
      continue;
    }
    out.row_start[i] = lo;
    out.row_vals[i].resize(hi - lo + 1);
    for (int j = lo; j <= hi; ++j) out.row_vals[i][j - lo] = refine(i + fshift, j + cshift);
  }
  return out;
}

GenEigDecomposition gen_eig(const Eigen::MatrixXd& K, const Eigen::MatrixXd& M) {
  if (K.rows() != K.cols() || M.rows() != M.cols() || K.rows() != M.rows())
    throw DomainError("gen_eig: shape mismatch");
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) throw DefinitenessError("gen_eig: M is not positive definite");
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(K, M, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
  if (solver.info() != Eigen::Success) throw DecompositionError("gen_eig: eigensolver failed");
  GenEigDecomposition out;
  out.eigenvalues = solver.eigenvalues();
  out.eigenvectors = solver.eigenvectors();
  for (Eigen::Index i = 0; i < out.eigenvalues.size(); ++i) {
    if (out.eigenvalues[i] < -1e-9 * std::abs(out.eigenvalues[out.eigenvalues.size() - 1]))
      throw DecompositionError("gen_eig: K has a significantly negative eigenvalue");
    if (out.eigenvalues[i] < 0.0) out.eigenvalues[i] = 0.0;
  }
  return out;
}

}  // namespace patchmg
