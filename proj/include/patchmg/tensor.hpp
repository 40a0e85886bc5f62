#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "patchmg/errors.hpp"
#include "patchmg/spline.hpp"

namespace patchmg {

/// Flat index of a tensor multi-index, axis 0 fastest.
inline std::int64_t flat_index(const std::vector<int>& idx, const std::vector<int>& dims) {
  std::int64_t f = 0;
  for (int a = int(dims.size()) - 1; a >= 0; --a) f = f * dims[a] + idx[a];
  return f;
}

/// y = (I x ... x M x ... x I) x with the dense matrix M acting on `axis`.
/// dims are the input tensor extents (axis 0 fastest); the output extent of
/// `axis` becomes M.rows().
Eigen::VectorXd apply_along_axis(const Eigen::MatrixXd& M, const Eigen::VectorXd& x,
                                 const std::vector<int>& dims, int axis);

/// Same with the transpose of M.
Eigen::VectorXd apply_along_axis_transpose(const Eigen::MatrixXd& M, const Eigen::VectorXd& x,
                                           const std::vector<int>& dims, int axis);

/// Same pair for the sparse two-scale factor.
Eigen::VectorXd apply_along_axis(const TwoScaleMatrix& P, const Eigen::VectorXd& x,
                                 const std::vector<int>& dims, int axis);
Eigen::VectorXd apply_along_axis_transpose(const TwoScaleMatrix& P, const Eigen::VectorXd& x,
                                           const std::vector<int>& dims, int axis);

/// Exact solver for sum-of-tensor operators
///   sum_a (I x..x K_a x..x I) prod_{b!=a} M_b-weights + sigma * (M x..x M)
/// via per-axis generalized eigendecompositions: with K_a V_a = M_a V_a D_a,
/// V_a^T M_a V_a = I, the operator diagonalizes to diag(sum_a d_a + sigma).
class FastDiagonalSolver {
 public:
  FastDiagonalSolver() = default;

  /// K[a], M[a] are the per-axis factors; the represented operator is
  ///   scale * ( sum_a K_a tensor (M elsewhere) + sigma * M tensor ... M ).
  FastDiagonalSolver(const std::vector<Eigen::MatrixXd>& K, const std::vector<Eigen::MatrixXd>& M,
                     double sigma, double scale);

  int dim() const { return total_; }
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  /// Forward application (for tests): y = L x.
  Eigen::VectorXd multiply(const Eigen::VectorXd& x) const;

  const Eigen::VectorXd& spectrum() const { return diag_; }

 private:
  std::vector<Eigen::MatrixXd> vecs_;   // V_a
  std::vector<Eigen::MatrixXd> minv_vecs_;  // M_a V_a (for multiply)
  std::vector<int> dims_;
  Eigen::VectorXd diag_;  // scale * (sum eigenvalues + sigma)
  int total_ = 0;
};

}  // namespace patchmg
