#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "patchmg/banded.hpp"

namespace patchmg {

/// Max spline degree accepted anywhere.
inline constexpr int kMaxDegree = 8;

enum class EndCondition { free, eliminated };

/// Univariate B-spline space of maximal smoothness on (0,1):
/// degree p, n uniform elements, open knot vector, C^{p-1} continuity.
/// Eliminated ends drop the first/last basis function (homogeneous Dirichlet).
class UnivariateSpace {
 public:
  UnivariateSpace(int degree, int elements, EndCondition left = EndCondition::free,
                  EndCondition right = EndCondition::free);

  int degree() const { return degree_; }
  int elements() const { return elements_; }
  double mesh_size() const { return 1.0 / elements_; }
  EndCondition left() const { return left_; }
  EndCondition right() const { return right_; }

  /// Basis count before boundary elimination: n + p.
  int full_dimension() const { return elements_ + degree_; }
  /// Basis count after elimination.
  int dimension() const {
    return full_dimension() - (left_ == EndCondition::eliminated ? 1 : 0) -
           (right_ == EndCondition::eliminated ? 1 : 0);
  }

  /// First/last active full-basis index.
  int first_active() const { return left_ == EndCondition::eliminated ? 1 : 0; }
  /// Full index -> eliminated index, or -1 if the function is eliminated.
  int to_reduced(int full_index) const {
    int r = full_index - first_active();
    return (r >= 0 && r < dimension()) ? r : -1;
  }

  /// Open knot vector including the repeated end knots.
  std::vector<double> knots() const;

  bool operator==(const UnivariateSpace& o) const = default;

 private:
  int degree_;
  int elements_;
  EndCondition left_, right_;
};

/// Values (deriv=0) or first derivatives (deriv=1) of the p+1 full-basis
/// functions supported at x.  first_index is the full-basis index of values[0].
struct BasisEval {
  int first_index;
  std::array<double, kMaxDegree + 1> values;
};

/// Cox-de Boor evaluation at x in [0,1].  Throws DomainError outside [0,1].
BasisEval eval_basis(const UnivariateSpace& space, double x, int deriv = 0);

/// Gram matrices over the eliminated basis, Gauss-Legendre p+1 points per
/// element (exact).  Bandwidth p.
BandedSymMatrix univariate_mass(const UnivariateSpace& space);
BandedSymMatrix univariate_stiffness(const UnivariateSpace& space);

/// Rectangular two-scale (knot insertion) matrix P with
/// fine coefficients = P * coarse coefficients, for the dyadic refinement of
/// `coarse` (same degree, doubled elements, same end conditions).
/// Rows have contiguous support.
struct TwoScaleMatrix {
  int fine_dim = 0;
  int coarse_dim = 0;
  std::vector<int> row_start;                 // first nonzero column per row
  std::vector<std::vector<double>> row_vals;  // contiguous nonzeros per row

  Eigen::MatrixXd to_dense() const;
  Eigen::VectorXd apply(const Eigen::VectorXd& coarse) const;
  Eigen::VectorXd apply_transpose(const Eigen::VectorXd& fine) const;
};

TwoScaleMatrix two_scale_matrix(const UnivariateSpace& coarse);

/// Generalized eigendecomposition K v = lambda M v with V^T M V = I,
/// eigenvalues ascending.  M must be SPD, K symmetric positive semidefinite.
struct GenEigDecomposition {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;  // columns
};

GenEigDecomposition gen_eig(const Eigen::MatrixXd& K, const Eigen::MatrixXd& M);

namespace detail {
/// Boehm single-knot insertion applied to a refinement matrix whose rows are
/// the current basis coefficients; grows the matrix by one row.
void insert_knot(std::vector<double>& knots, int degree, double u, Eigen::MatrixXd& refine);
}  // namespace detail

}  // namespace patchmg
