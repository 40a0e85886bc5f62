#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "patchmg/geometry.hpp"

namespace patchmg {

/// Tag of a patch side.  `matched` sides belong to an interface.
enum class SideTag : std::uint8_t { dirichlet, neumann, matched };

/// Side s of a patch: axis s/2, end s%2 (0 -> xhat_axis=0, 1 -> xhat_axis=1).
inline int side_axis(int side) { return side / 2; }
inline int side_end(int side) { return side % 2; }
inline int side_of(int axis, int end) { return 2 * axis + end; }

const char* side_name(int side, int dim);
int side_from_name(const std::string& name, int dim);

/// Matched side pair.  patch_a < patch_b (or side_a < side_b within a patch).
/// `orientation` maps side-local coordinates of A to side-local coordinates
/// of B: 2D bit0 = flip; 3D bit0 = swap the two in-side axes, bit1/bit2 =
/// flip the first/second in-side coordinate of B.
struct Interface {
  int patch_a, side_a;
  int patch_b, side_b;
  std::uint8_t orientation;
};

/// In-side axes of a side: all axes except the normal one, ascending.
std::vector<int> inside_axes(int dim, int side);

/// Map a side-local multi-index through an orientation code.
/// sizes_b are the in-side extents on side B.
std::array<int, 2> map_side_index(int dim, std::uint8_t orientation, const std::array<int, 2>& idx,
                                  const std::array<int, 2>& sizes_b);
/// Continuous version for parameters in (0,1)^(dim-1).
std::array<double, 2> map_side_param(int dim, std::uint8_t orientation,
                                     const std::array<double, 2>& uv);

/// Multi-patch domain: patch geometry maps, discovered interfaces, side tags.
struct MultiPatchDomain {
  int dim = 0;
  std::vector<GeometryMap> patches;
  std::vector<Interface> interfaces;
  std::vector<std::array<SideTag, 6>> side_tags;  // per patch, indexed by side
  double geometric_tolerance = 0.0;  // absolute; set by build_topology if 0

  int num_patches() const { return int(patches.size()); }
  SideTag tag(int patch, int side) const { return side_tags[patch][side]; }
  /// Physical point of an in-side parameter (uv has dim-1 meaningful entries).
  Eigen::VectorXd side_point(int patch, int side, const std::array<double, 2>& uv) const;
};

/// Geometric interface discovery.  Boundary tags of unmatched sides are kept
/// as provided; matched sides are tagged `matched`.  Throws NonManifoldError
/// if a side matches twice, NonMatchingError if side images overlap on a set
/// of positive measure without matching.
void build_topology(MultiPatchDomain& domain);

/// Split every patch into m^dim subpatches (children of patch k come first,
/// ordered lexicographically by subcell).  Child sides on a parent boundary
/// side inherit its tag; interfaces are re-discovered.
MultiPatchDomain split_patches(const MultiPatchDomain& domain, int m);

/// Maps per-patch tensor-product dof lattices (degree p, n elements per
/// direction, full basis) to global dof ids.  Interface dofs are identified;
/// dofs on Dirichlet sides map to -1.
class DofMapper {
 public:
  DofMapper(const MultiPatchDomain& domain, int degree, int elements);
  /// The mapper keeps a pointer to the domain; a temporary would dangle.
  DofMapper(MultiPatchDomain&&, int, int) = delete;

  const MultiPatchDomain& domain() const { return *domain_; }
  int degree() const { return degree_; }
  int elements() const { return elements_; }
  /// Per-direction lattice extent (n + p, equal in all directions).
  int extent() const { return elements_ + degree_; }
  std::int64_t num_dofs() const { return num_dofs_; }

  const std::vector<std::int32_t>& local_to_global(int patch) const { return l2g_[patch]; }
  std::int32_t global_of(int patch, std::int64_t local) const { return l2g_[patch][local]; }

  /// All (patch, local index) representatives of a global dof, ascending.
  std::vector<std::pair<std::int32_t, std::int32_t>> reps(std::int32_t global) const;
  int rep_count(std::int32_t global) const { return rep_off_[global + 1] - rep_off_[global]; }
  /// Lowest adjacent patch (owner) of a global dof.
  std::int32_t owner_patch(std::int32_t global) const { return rep_patch_[rep_off_[global]]; }

  std::int64_t flat_of(int patch, const std::vector<int>& idx) const;
  std::vector<int> unflatten(int patch, std::int64_t flat) const;

 private:
  const MultiPatchDomain* domain_;
  int degree_, elements_;
  std::int64_t num_dofs_ = 0;
  std::vector<std::vector<std::int32_t>> l2g_;
  std::vector<std::int32_t> rep_off_;
  std::vector<std::int32_t> rep_patch_;
  std::vector<std::int32_t> rep_local_;
};

enum class PieceKind { interior, face, edge, vertex };

/// One piece of the additive space decomposition: a tensor lattice of global
/// dofs.  `spaces` are the per-direction factors of the lattice (empty for a
/// vertex); dofs are in lattice order, first factor fastest.
struct Piece {
  PieceKind kind;
  int patch;  // interior: the patch; face/edge: canonical adjacent patch; vertex: owner
  std::vector<std::int32_t> dofs;
  std::vector<UnivariateSpace> spaces;
};

/// Every non-eliminated dof lands in exactly one piece, classified by support:
/// interior pieces per patch, face pieces per interface (3D), edge pieces per
/// shared 1D entity, vertex pieces per shared patch corner.  Degenerate
/// (empty or fully eliminated) pieces are dropped.
std::vector<Piece> classify_dofs(const DofMapper& mapper);

}  // namespace patchmg
