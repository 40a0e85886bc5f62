#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "patchmg/banded.hpp"
#include "patchmg/tensor.hpp"
#include "patchmg/topology.hpp"

namespace patchmg {

/// One term of the additive space decomposition: a piece of the dof partition
/// plus the factorized local operator L_T.  Payload by piece kind:
/// vertex -> scalar, edge -> banded Cholesky, face/interior -> tensor solver.
class PieceSmoother {
 public:
  PieceSmoother(Piece piece, double scalar);
  PieceSmoother(Piece piece, BandedCholesky payload);
  PieceSmoother(Piece piece, FastDiagonalSolver payload);

  const Piece& piece() const { return piece_; }

  /// L_T^{-1} applied to an already-gathered piece-local vector.
  Eigen::VectorXd solve(const Eigen::VectorXd& local) const;

  /// correction[piece dofs] += L_T^{-1} residual[piece dofs].
  void apply_add(const Eigen::VectorXd& residual, Eigen::VectorXd& correction) const;

  /// Vertex payload: the diagonal value of L_T (not its inverse).
  double vertex_scalar() const { return scalar_; }

  /// Copy with the dof list rewritten through `to_local`: the same factorized
  /// operator applied on another index space (a rank's local dofs).
  PieceSmoother reindexed(const std::vector<std::int32_t>& to_local) const;

 private:
  enum class Payload { scalar, banded, tensor };
  Piece piece_;
  Payload payload_;
  double scalar_ = 0.0;
  BandedCholesky banded_;
  FastDiagonalSolver tensor_;
};

/// Local operators, all built from parameter-domain univariate stiffness K and
/// mass M on the piece's per-direction spaces (geometry never enters):
///   vertex:   L = (h/p)^{d-2}
///   edge:     L = (h/p)^{d-1} K + (h/p)^{d-3} M
///   face:     L = (h/p) (K x M + M x K + (p^2/h^2) M x M)      (d = 3)
///   interior: L = K-hat + sigma M-hat, solved by fast diagonalization
PieceSmoother build_vertex_smoother(Piece piece, double h, int p, int d);
PieceSmoother build_edge_smoother(Piece piece, double h, int p, int d);
PieceSmoother build_face_smoother(Piece piece, double h, int p);
PieceSmoother build_interior_smoother(Piece piece, double sigma);

/// Additive Schwarz smoother over the piece decomposition of one level:
/// L^{-1} = sum_T P_T L_T^{-1} P_T^T.  Symmetric positive definite because the
/// pieces partition the dofs and every payload is SPD on its subspace.
class HybridSmoother {
 public:
  HybridSmoother() = default;

  /// Builds the decomposition and all local solvers for the mapper's level.
  /// The interior shift is sigma = h^{-2} / sigma_scale.  tau is stored for
  /// the cycle's use; apply() never multiplies by it.
  explicit HybridSmoother(const DofMapper& mapper, double tau = 0.25, double sigma_scale = 0.2);

  std::int64_t dim() const { return num_dofs_; }
  double tau() const { return tau_; }
  const std::vector<PieceSmoother>& pieces() const { return pieces_; }

  /// Undamped additive correction sum_T P_T L_T^{-1} P_T^T residual.
  Eigen::VectorXd apply(const Eigen::VectorXd& residual) const;

 private:
  std::int64_t num_dofs_ = 0;
  double tau_ = 0.25;
  std::vector<PieceSmoother> pieces_;
};

}  // namespace patchmg
