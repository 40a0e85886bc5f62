#pragma once

#include <Eigen/Dense>
#include <vector>

#include "patchmg/spline.hpp"

namespace patchmg {

/// Tensor B-spline geometry map G: (0,1)^d -> R^d.
/// Control points are stored row-major over the tensor lattice, axis 0 fastest;
/// row i of control_points is the i-th control point.
class GeometryMap {
 public:
  GeometryMap() = default;
  GeometryMap(std::vector<UnivariateSpace> spaces, Eigen::MatrixXd control_points);

  int dim() const { return int(spaces_.size()); }
  const std::vector<UnivariateSpace>& spaces() const { return spaces_; }
  const Eigen::MatrixXd& control_points() const { return control_points_; }

  /// G(x_hat).  param must have dim() entries in [0,1].
  Eigen::VectorXd eval(const Eigen::VectorXd& param) const;

  /// J(i,j) = d x_i / d xhat_j.
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& param) const;

  /// Restriction of the map to the subcell prod_a [cell[a]/m, (cell[a]+1)/m],
  /// re-parametrized to (0,1)^d.  Requires the subdivision to be represent-
  /// able on an open-uniform knot vector (m divides the element count, or the
  /// direction has a single element).
  GeometryMap restrict_to_subcell(const std::vector<int>& cell, int m) const;

  /// Axis-aligned translate-and-scale map with the given corner and extents,
  /// built from degree-1 single-element spaces.
  static GeometryMap axis_aligned_box(const Eigen::VectorXd& corner, const Eigen::VectorXd& extent);

 private:
  std::vector<UnivariateSpace> spaces_;
  Eigen::MatrixXd control_points_;
};

}  // namespace patchmg
