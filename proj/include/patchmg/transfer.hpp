#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "patchmg/spline.hpp"
#include "patchmg/topology.hpp"

namespace patchmg {

/// Intergrid transfer between the dof mappers of two dyadically nested levels
/// (same domain and degree, fine elements = 2 * coarse elements).
///
/// Prolongation acts on accumulated global vectors and is owner-write: the
/// value of every fine dof comes from the tensor two-scale kernel of its owner
/// patch, so the result does not depend on how patches are distributed.
/// Restriction acts per patch on local lattice residual shares (the transpose
/// kernel); summing the coarse shares over patches gives the transposed
/// prolongation up to roundoff.
class TransferOperator {
 public:
  TransferOperator(const DofMapper& coarse, const DofMapper& fine);

  const DofMapper& coarse() const { return *coarse_; }
  const DofMapper& fine() const { return *fine_; }
  const TwoScaleMatrix& factor() const { return two_scale_; }

  /// Tensor prolongation of one patch into its fine local lattice.
  void prolong_patch(int patch, const Eigen::VectorXd& coarse_acc,
                     Eigen::VectorXd& fine_lattice) const;
  /// Owner-write prolongation over all patches.
  Eigen::VectorXd prolong(const Eigen::VectorXd& coarse_acc) const;

  /// Transpose kernel on one patch's local lattice share.
  void restrict_patch(int patch, const Eigen::VectorXd& fine_lattice_share,
                      Eigen::VectorXd& coarse_lattice_share) const;

  /// Transposed prolongation on a summed global vector: the vector splits into
  /// owner-masked patch shares, each share runs the transpose kernel, and the
  /// coarse shares are summed in ascending patch order.
  Eigen::VectorXd restrict_full(const Eigen::VectorXd& fine_summed) const;

  /// The global prolongation matrix (tests and small problems only).
  Eigen::SparseMatrix<double> explicit_matrix() const;

 private:
  const DofMapper* coarse_;
  const DofMapper* fine_;
  TwoScaleMatrix two_scale_;
};

}  // namespace patchmg
