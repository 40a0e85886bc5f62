#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <functional>
#include <vector>

#include "patchmg/topology.hpp"

namespace patchmg {

/// Stiffness block of one patch, CSR over the patch's full tensor lattice.
/// Rows and columns are local flat lattice indices; Dirichlet elimination and
/// interface identification happen at the global gather/scatter through the
/// dof mapper.
struct PatchOperator {
  std::int64_t rows = 0;
  std::vector<std::int64_t> row_ptr;
  std::vector<std::int32_t> cols;
  std::vector<double> vals;

  /// y += A x over local lattice vectors.
  void apply_add(const double* x, double* y) const;
  Eigen::MatrixXd to_dense() const;
};

/// The multi-patch stiffness as the mapper-glued sum of per-patch blocks.
/// The global matrix exists only as this scattered sum; assemble_global
/// materializes it for direct solves and tests.
class MultiPatchOperator {
 public:
  MultiPatchOperator() = default;
  MultiPatchOperator(const DofMapper& mapper, std::vector<PatchOperator> blocks);

  const DofMapper& mapper() const { return *mapper_; }
  const PatchOperator& block(int patch) const { return blocks_[patch]; }
  std::int64_t rows() const { return mapper_->num_dofs(); }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  Eigen::SparseMatrix<double> assemble_global() const;

 private:
  const DofMapper* mapper_ = nullptr;
  std::vector<PatchOperator> blocks_;
};

/// Galerkin stiffness of the Laplacian on one mapped patch: integrand
/// grad^T (|det J| J^-1 J^-T) grad, Gauss-Legendre degree+1 points per
/// direction and element.  Throws SingularGeometryError on |det J| <= 0.
PatchOperator assemble_patch_stiffness(const GeometryMap& geo, int degree, int elements);

/// All patch blocks of the mapper's domain.
MultiPatchOperator assemble_stiffness(const DofMapper& mapper);

/// Load vector of a source term given in physical coordinates.
Eigen::VectorXd assemble_rhs(const DofMapper& mapper,
                             const std::function<double(const Eigen::VectorXd&)>& f);

}  // namespace patchmg
