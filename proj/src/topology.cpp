#include "patchmg/topology.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <set>

#include "patchmg/errors.hpp"

namespace patchmg {

namespace {

constexpr std::array<const char*, 6> kSideNames = {"xmin", "xmax", "ymin", "ymax", "zmin", "zmax"};

// Interior sample coordinates, deliberately not symmetric under t -> 1-t so
// that a flipped match cannot alias an unflipped one.
constexpr std::array<double, 4> kSideSamples = {0.109375, 0.28125, 0.609375, 0.84375};

}  // namespace

const char* side_name(int side, int dim) {
  if (side < 0 || side >= 2 * dim) throw DomainError("side_name: bad side");
  return kSideNames[side];
}

int side_from_name(const std::string& name, int dim) {
  for (int s = 0; s < 2 * dim; ++s)
    if (name == kSideNames[s]) return s;
  throw ConfigError("unknown side name: " + name);
}

std::vector<int> inside_axes(int dim, int side) {
  std::vector<int> axes;
  for (int a = 0; a < dim; ++a)
    if (a != side_axis(side)) axes.push_back(a);
  return axes;
}

std::array<double, 2> map_side_param(int dim, std::uint8_t o, const std::array<double, 2>& uv) {
  if (dim == 2) return {(o & 1) ? 1.0 - uv[0] : uv[0], 0.0};
  double s = (o & 1) ? uv[1] : uv[0];
  double t = (o & 1) ? uv[0] : uv[1];
  if (o & 2) s = 1.0 - s;
  if (o & 4) t = 1.0 - t;
  return {s, t};
}

std::array<int, 2> map_side_index(int dim, std::uint8_t o, const std::array<int, 2>& idx,
                                  const std::array<int, 2>& sizes_b) {
  if (dim == 2) return {(o & 1) ? sizes_b[0] - 1 - idx[0] : idx[0], 0};
  int s = (o & 1) ? idx[1] : idx[0];
  int t = (o & 1) ? idx[0] : idx[1];
  if (o & 2) s = sizes_b[0] - 1 - s;
  if (o & 4) t = sizes_b[1] - 1 - t;
  return {s, t};
}

Eigen::VectorXd MultiPatchDomain::side_point(int patch, int side,
                                             const std::array<double, 2>& uv) const {
  Eigen::VectorXd param(dim);
  param[side_axis(side)] = double(side_end(side));
  auto axes = inside_axes(dim, side);
  for (std::size_t i = 0; i < axes.size(); ++i) param[axes[i]] = uv[i];
  return patches[patch].eval(param);
}

namespace {

struct SideSamples {
  int patch, side;
  std::vector<Eigen::VectorXd> points;  // grid over kSideSamples, first axis fastest
  Eigen::VectorXd bbox_lo, bbox_hi;
  double diameter;
};

SideSamples sample_side(const MultiPatchDomain& dom, int patch, int side) {
  SideSamples out;
  out.patch = patch;
  out.side = side;
  const int d = dom.dim;
  const int ni = int(kSideSamples.size());
  const int nj = d == 2 ? 1 : int(kSideSamples.size());
  for (int j = 0; j < nj; ++j)
    for (int i = 0; i < ni; ++i)
      out.points.push_back(dom.side_point(patch, side, {kSideSamples[i], d == 3 ? kSideSamples[j] : 0.0}));
  out.bbox_lo = out.points[0];
  out.bbox_hi = out.points[0];
  for (const auto& p : out.points) {
    out.bbox_lo = out.bbox_lo.cwiseMin(p);
    out.bbox_hi = out.bbox_hi.cwiseMax(p);
  }
  out.diameter = (out.bbox_hi - out.bbox_lo).norm();
  return out;
}

// Orientation code c matches if B(map_c(u)) == A(u) at all sample points.
bool try_orientation(const MultiPatchDomain& dom, const SideSamples& a, const SideSamples& b,
                     std::uint8_t code, double tol) {
  const int d = dom.dim;
  const int ni = int(kSideSamples.size());
  const int nj = d == 3 ? ni : 1;
  int idx = 0;
  for (int j = 0; j < nj; ++j)
    for (int i = 0; i < ni; ++i, ++idx) {
      auto uv = map_side_param(d, code, {kSideSamples[i], d == 3 ? kSideSamples[j] : 0.0});
      Eigen::VectorXd pb = dom.side_point(b.patch, b.side, uv);
      if ((pb - a.points[idx]).lpNorm<Eigen::Infinity>() > tol) return false;
    }
  return true;
}

bool side_plane(const SideSamples& s, double tol, Eigen::VectorXd& normal, double& offset) {
  const int d = int(s.points[0].size());
  Eigen::MatrixXd pts(s.points.size(), d);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (std::size_t i = 0; i < s.points.size(); ++i) mean += s.points[i];
  mean /= double(s.points.size());
  for (std::size_t i = 0; i < s.points.size(); ++i) pts.row(i) = (s.points[i] - mean).transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(pts, Eigen::ComputeThinV);
  if (svd.singularValues()[d - 1] > tol) return false;
  normal = svd.matrixV().col(d - 1);
  offset = normal.dot(mean);
  return true;
}

}  // namespace

void build_topology(MultiPatchDomain& domain) {
  const int d = domain.dim;
  if (d < 2 || d > 3) throw DomainError("build_topology: dimension must be 2 or 3");
  if (domain.patches.empty()) throw DomainError("build_topology: no patches");
  if (domain.side_tags.size() != domain.patches.size())
    throw DomainError("build_topology: side tags missing");

  if (domain.geometric_tolerance <= 0.0) {
    Eigen::VectorXd lo = domain.patches[0].control_points().colwise().minCoeff().transpose();
    Eigen::VectorXd hi = domain.patches[0].control_points().colwise().maxCoeff().transpose();
    for (const auto& g : domain.patches) {
      lo = lo.cwiseMin(g.control_points().colwise().minCoeff().transpose());
      hi = hi.cwiseMax(g.control_points().colwise().maxCoeff().transpose());
    }
    domain.geometric_tolerance = 1e-8 * (hi - lo).norm();
  }
  const double tol = domain.geometric_tolerance;

  std::vector<SideSamples> sides;
  for (int k = 0; k < domain.num_patches(); ++k)
    for (int s = 0; s < 2 * d; ++s) sides.push_back(sample_side(domain, k, s));

  domain.interfaces.clear();
  std::vector<int> match_count(sides.size(), 0);
  const int ncodes = d == 2 ? 2 : 8;

  for (std::size_t i = 0; i < sides.size(); ++i) {
    for (std::size_t j = i + 1; j < sides.size(); ++j) {
      const auto& A = sides[i];
      const auto& B = sides[j];
      if (A.patch == B.patch && A.side == B.side) continue;
      // quick reject: inflated bounding boxes must intersect
      double inflate = tol + 0.15 * std::max(A.diameter, B.diameter);
      bool touch = true;
      for (int a = 0; a < d; ++a)
        if (A.bbox_lo[a] - inflate > B.bbox_hi[a] || B.bbox_lo[a] - inflate > A.bbox_hi[a])
          touch = false;
      if (!touch) continue;

      int found = -1;
      for (int c = 0; c < ncodes && found < 0; ++c)
        if (try_orientation(domain, A, B, std::uint8_t(c), tol)) found = c;
      if (found >= 0) {
        ++match_count[i];
        ++match_count[j];
        if (match_count[i] > 1 || match_count[j] > 1)
          throw NonManifoldError("build_topology: a patch side matches more than one partner");
        domain.interfaces.push_back({A.patch, A.side, B.patch, B.side, std::uint8_t(found)});
        continue;
      }

      // Unmatched but possibly overlapping: flag flat coplanar sides whose
      // boxes overlap on a positive-measure set (partial overlap, offsets,
      // T-junctions).
      int wide = 0;
      bool all_touch = true;
      for (int a = 0; a < d; ++a) {
        double ov = std::min(A.bbox_hi[a], B.bbox_hi[a]) - std::max(A.bbox_lo[a], B.bbox_lo[a]);
        if (ov < -tol) all_touch = false;
        if (ov > std::max(20 * tol, 0.2 * std::min(A.diameter, B.diameter))) ++wide;
      }
      if (all_touch && wide >= d - 1) {
        Eigen::VectorXd na, nb;
        double oa, ob;
        if (side_plane(A, 10 * tol, na, oa) && side_plane(B, 10 * tol, nb, ob)) {
          if (std::abs(std::abs(na.dot(nb)) - 1.0) < 1e-6 &&
              std::abs(na.dot(nb) * ob - oa) < 10 * tol)
            throw NonMatchingError("build_topology: patch sides overlap without matching");
        }
      }
    }
  }

  // retag matched sides
  for (const auto& ifc : domain.interfaces) {
    domain.side_tags[ifc.patch_a][ifc.side_a] = SideTag::matched;
    domain.side_tags[ifc.patch_b][ifc.side_b] = SideTag::matched;
  }
}

MultiPatchDomain split_patches(const MultiPatchDomain& domain, int m) {
  if (m < 1 || m > 8) throw ConfigError("split_patches: m out of range [1,8]");
  if (m == 1) return domain;
  const int d = domain.dim;
  MultiPatchDomain out;
  out.dim = d;
  out.geometric_tolerance = domain.geometric_tolerance;

  std::int64_t cells = 1;
  for (int a = 0; a < d; ++a) cells *= m;

  std::vector<std::pair<int, int>> must_match;  // child patch, side
  for (int k = 0; k < domain.num_patches(); ++k) {
    std::vector<int> cell(d, 0);
    for (std::int64_t c = 0; c < cells; ++c) {
      out.patches.push_back(domain.patches[k].restrict_to_subcell(cell, m));
      std::array<SideTag, 6> tags{};
      for (int s = 0; s < 2 * d; ++s) {
        int a = side_axis(s), e = side_end(s);
        bool on_parent_boundary = (e == 0 && cell[a] == 0) || (e == 1 && cell[a] == m - 1);
        if (on_parent_boundary && domain.tag(k, s) != SideTag::matched) {
          tags[s] = domain.tag(k, s);
        } else {
          tags[s] = SideTag::neumann;  // placeholder, must be re-matched
          must_match.push_back({int(out.patches.size()) - 1, s});
        }
      }
      out.side_tags.push_back(tags);
      for (int a = 0; a < d; ++a) {
        if (++cell[a] < m) break;
        cell[a] = 0;
      }
    }
  }

  build_topology(out);
  for (auto [child, s] : must_match)
    if (out.tag(child, s) != SideTag::matched)
      throw NonMatchingError("split_patches: an interior child side failed to re-match");
  return out;
}

// ---------------------------------------------------------------------------
// DofMapper

namespace {

struct UnionFind {
  std::vector<std::int32_t> parent;
  explicit UnionFind(std::int64_t n) : parent(n) {
    for (std::int64_t i = 0; i < n; ++i) parent[i] = std::int32_t(i);
  }
  std::int32_t find(std::int32_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(std::int32_t a, std::int32_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

DofMapper::DofMapper(const MultiPatchDomain& domain, int degree, int elements)
    : domain_(&domain), degree_(degree), elements_(elements) {
  const int d = domain.dim;
  const int K = domain.num_patches();
  const int ext = extent();
  std::int64_t per_patch = 1;
  for (int a = 0; a < d; ++a) per_patch *= ext;
  std::int64_t total = per_patch * K;
  if (total > std::numeric_limits<std::int32_t>::max())
    throw ConfigError("DofMapper: lattice too large for 32-bit indexing");

  auto stride = [&](int axis) {
    std::int64_t s = 1;
    for (int a = 0; a < axis; ++a) s *= ext;
    return s;
  };
  auto base = [&](int patch) { return std::int64_t(patch) * per_patch; };

  UnionFind uf(total);

  // Identify matched side lattices.
  for (const auto& ifc : domain.interfaces) {
    auto axes_a = inside_axes(d, ifc.side_a);
    auto axes_b = inside_axes(d, ifc.side_b);
    const int na = side_axis(ifc.side_a), nb = side_axis(ifc.side_b);
    const std::int64_t fixed_a = std::int64_t(side_end(ifc.side_a) ? ext - 1 : 0) * stride(na);
    const std::int64_t fixed_b = std::int64_t(side_end(ifc.side_b) ? ext - 1 : 0) * stride(nb);
    std::array<int, 2> sizes_b = {ext, ext};
    const int ni = ext, nj = d == 3 ? ext : 1;
    for (int j = 0; j < nj; ++j)
      for (int i = 0; i < ni; ++i) {
        auto mapped = map_side_index(d, ifc.orientation, {i, j}, sizes_b);
        std::int64_t fa = base(ifc.patch_a) + fixed_a + i * stride(axes_a[0]) +
                          (d == 3 ? j * stride(axes_a[1]) : 0);
        std::int64_t fb = base(ifc.patch_b) + fixed_b + mapped[0] * stride(axes_b[0]) +
                          (d == 3 ? std::int64_t(mapped[1]) * stride(axes_b[1]) : 0);
        uf.unite(std::int32_t(fa), std::int32_t(fb));
      }
  }

  // Mark Dirichlet roots.
  std::vector<bool> dirichlet(total, false);
  for (int k = 0; k < K; ++k)
    for (int s = 0; s < 2 * d; ++s) {
      if (domain.tag(k, s) != SideTag::dirichlet) continue;
      auto axes = inside_axes(d, s);
      const std::int64_t fixed = std::int64_t(side_end(s) ? ext - 1 : 0) * stride(side_axis(s));
      const int ni = ext, nj = d == 3 ? ext : 1;
      for (int j = 0; j < nj; ++j)
        for (int i = 0; i < ni; ++i) {
          std::int64_t f = base(k) + fixed + i * stride(axes[0]) +
                           (d == 3 ? std::int64_t(j) * stride(axes[1]) : 0);
          dirichlet[uf.find(std::int32_t(f))] = true;
        }
    }

  // Deterministic numbering: first encounter in (patch, lattice) order.
  std::vector<std::int32_t> root_id(total, -2);  // -2 unseen, -1 dirichlet, else id
  l2g_.assign(K, std::vector<std::int32_t>(per_patch, -1));
  std::int32_t next = 0;
  for (int k = 0; k < K; ++k)
    for (std::int64_t f = 0; f < per_patch; ++f) {
      std::int32_t r = uf.find(std::int32_t(base(k) + f));
      if (root_id[r] == -2) root_id[r] = dirichlet[r] ? -1 : next++;
      l2g_[k][f] = root_id[r];
    }
  num_dofs_ = next;

  // Representative lists (CSR), ascending (patch, local).
  rep_off_.assign(num_dofs_ + 1, 0);
  for (int k = 0; k < K; ++k)
    for (std::int64_t f = 0; f < per_patch; ++f)
      if (l2g_[k][f] >= 0) ++rep_off_[l2g_[k][f] + 1];
  for (std::int64_t g = 0; g < num_dofs_; ++g) rep_off_[g + 1] += rep_off_[g];
  rep_patch_.resize(rep_off_.back());
  rep_local_.resize(rep_off_.back());
  std::vector<std::int32_t> cursor(rep_off_.begin(), rep_off_.end() - 1);
  for (int k = 0; k < K; ++k)
    for (std::int64_t f = 0; f < per_patch; ++f) {
      std::int32_t g = l2g_[k][f];
      if (g < 0) continue;
      rep_patch_[cursor[g]] = k;
      rep_local_[cursor[g]] = std::int32_t(f);
      ++cursor[g];
    }
}

std::vector<std::pair<std::int32_t, std::int32_t>> DofMapper::reps(std::int32_t g) const {
  std::vector<std::pair<std::int32_t, std::int32_t>> out;
  for (std::int32_t i = rep_off_[g]; i < rep_off_[g + 1]; ++i)
    out.push_back({rep_patch_[i], rep_local_[i]});
  return out;
}

std::int64_t DofMapper::flat_of(int patch, const std::vector<int>& idx) const {
  (void)patch;
  std::int64_t f = 0;
  for (int a = domain_->dim - 1; a >= 0; --a) f = f * extent() + idx[a];
  return f;
}

std::vector<int> DofMapper::unflatten(int patch, std::int64_t flat) const {
  (void)patch;
  std::vector<int> idx(domain_->dim);
  for (int a = 0; a < domain_->dim; ++a) {
    idx[a] = int(flat % extent());
    flat /= extent();
  }
  return idx;
}

// ---------------------------------------------------------------------------
// Piece classification

std::vector<Piece> classify_dofs(const DofMapper& mapper) {
  const MultiPatchDomain& dom = mapper.domain();
  const int d = dom.dim;
  const int K = dom.num_patches();
  const int p = mapper.degree();
  const int n = mapper.elements();
  const int ext = mapper.extent();
  std::vector<Piece> pieces;

  auto end_flag = [&](int patch, int axis, int end) {
    return dom.tag(patch, side_of(axis, end)) == SideTag::neumann ? EndCondition::free
                                                                  : EndCondition::eliminated;
  };

  // interior pieces: per patch, the tensor box of dofs supported only there
  for (int k = 0; k < K; ++k) {
    Piece piece;
    piece.kind = PieceKind::interior;
    piece.patch = k;
    std::vector<int> lo(d), hi(d);
    for (int a = 0; a < d; ++a) {
      piece.spaces.emplace_back(p, n, end_flag(k, a, 0), end_flag(k, a, 1));
      lo[a] = piece.spaces[a].first_active();
      hi[a] = lo[a] + piece.spaces[a].dimension() - 1;
      if (hi[a] < lo[a]) hi[a] = lo[a] - 1;
    }
    std::vector<int> idx = lo;
    bool empty = false;
    for (int a = 0; a < d; ++a)
      if (hi[a] < lo[a]) empty = true;
    if (!empty) {
      for (;;) {
        piece.dofs.push_back(mapper.global_of(k, mapper.flat_of(k, idx)));
        int a = 0;
        for (; a < d; ++a) {
          if (++idx[a] <= hi[a]) break;
          idx[a] = lo[a];
        }
        if (a == d) break;
      }
    }
    if (!piece.dofs.empty()) pieces.push_back(std::move(piece));
  }

  // face pieces (3D): strict interior of each interface lattice
  if (d == 3) {
    for (const auto& ifc : dom.interfaces) {
      if (ext - 2 < 1) break;
      Piece piece;
      piece.kind = PieceKind::face;
      piece.patch = ifc.patch_a;
      piece.spaces.assign(2, UnivariateSpace(p, n, EndCondition::eliminated, EndCondition::eliminated));
      auto axes = inside_axes(d, ifc.side_a);
      const int na = side_axis(ifc.side_a);
      std::vector<int> idx(d);
      idx[na] = side_end(ifc.side_a) ? ext - 1 : 0;
      bool dropped = false;
      for (int j = 1; j <= ext - 2 && !dropped; ++j)
        for (int i = 1; i <= ext - 2; ++i) {
          idx[axes[0]] = i;
          idx[axes[1]] = j;
          std::int32_t g = mapper.global_of(ifc.patch_a, mapper.flat_of(ifc.patch_a, idx));
          if (g < 0) {
            dropped = true;  // the whole face lies on a Dirichlet side
            break;
          }
          piece.dofs.push_back(g);
        }
      if (!dropped && !piece.dofs.empty()) pieces.push_back(std::move(piece));
    }
  }

  // edge pieces: 2D straight from interfaces; 3D from grouped patch edges
  if (d == 2) {
    for (const auto& ifc : dom.interfaces) {
      if (ext - 2 < 1) break;
      Piece piece;
      piece.kind = PieceKind::edge;
      piece.patch = ifc.patch_a;
      piece.spaces.assign(1, UnivariateSpace(p, n, EndCondition::eliminated, EndCondition::eliminated));
      auto axes = inside_axes(d, ifc.side_a);
      std::vector<int> idx(d);
      idx[side_axis(ifc.side_a)] = side_end(ifc.side_a) ? ext - 1 : 0;
      bool dropped = false;
      for (int i = 1; i <= ext - 2; ++i) {
        idx[axes[0]] = i;
        std::int32_t g = mapper.global_of(ifc.patch_a, mapper.flat_of(ifc.patch_a, idx));
        if (g < 0) {
          dropped = true;
          break;
        }
        piece.dofs.push_back(g);
      }
      if (!dropped && !piece.dofs.empty()) pieces.push_back(std::move(piece));
    }
  } else {
    // A patch edge is (patch, boundary axes+ends); edges touched by a common
    // interface side are identified, transitively.
    struct EdgeKey {
      int patch, a0, e0, a1, e1;  // a0 < a1
      auto operator<=>(const EdgeKey&) const = default;
    };
    std::map<EdgeKey, int> key_id;
    std::vector<EdgeKey> keys;
    std::vector<int> uf_parent;
    auto key_index = [&](const EdgeKey& k) {
      auto it = key_id.find(k);
      if (it != key_id.end()) return it->second;
      int id = int(keys.size());
      key_id.emplace(k, id);
      keys.push_back(k);
      uf_parent.push_back(id);
      return id;
    };
    std::function<int(int)> find = [&](int x) {
      while (uf_parent[x] != x) x = uf_parent[x] = uf_parent[uf_parent[x]];
      return x;
    };
    auto unite = [&](int a, int b) {
      a = find(a);
      b = find(b);
      if (a != b) uf_parent[std::max(a, b)] = std::min(a, b);
    };
    auto make_key = [](int patch, int ax0, int end0, int ax1, int end1) {
      if (ax0 > ax1) {
        std::swap(ax0, ax1);
        std::swap(end0, end1);
      }
      return EdgeKey{patch, ax0, end0, ax1, end1};
    };

    for (const auto& ifc : dom.interfaces) {
      auto axes_a = inside_axes(d, ifc.side_a);
      auto axes_b = inside_axes(d, ifc.side_b);
      // the side's 4 boundary edges: in-side axis q fixed at end e
      for (int q = 0; q < 2; ++q)
        for (int e = 0; e < 2; ++e) {
          EdgeKey ka = make_key(ifc.patch_a, side_axis(ifc.side_a), side_end(ifc.side_a),
                                axes_a[q], e);
          // image of the fixed in-side coordinate under the orientation code
          std::array<int, 2> probe0{0, 0}, probe1{1, 1};
          probe0[q] = e ? ext - 1 : 0;
          probe1[q] = e ? ext - 1 : 0;
          auto m0 = map_side_index(d, ifc.orientation, probe0, {ext, ext});
          auto m1 = map_side_index(d, ifc.orientation, probe1, {ext, ext});
          int qb = (m0[0] == m1[0]) ? 0 : 1;
          int eb = (m0[qb] == 0) ? 0 : 1;
          EdgeKey kb = make_key(ifc.patch_b, side_axis(ifc.side_b), side_end(ifc.side_b),
                                axes_b[qb], eb);
          unite(key_index(ka), key_index(kb));
        }
    }

    std::map<int, std::vector<int>> groups;  // root -> key indices
    for (int i = 0; i < int(keys.size()); ++i) groups[find(i)].push_back(i);
    for (auto& [root, members] : groups) {
      if (members.size() < 2 || ext - 2 < 1) continue;
      const EdgeKey& canon = keys[*std::min_element(
          members.begin(), members.end(),
          [&](int x, int y) { return keys[x] < keys[y]; })];
      int tangent = 3 - canon.a0 - canon.a1;
      Piece piece;
      piece.kind = PieceKind::edge;
      piece.patch = canon.patch;
      piece.spaces.assign(1, UnivariateSpace(p, n, EndCondition::eliminated, EndCondition::eliminated));
      std::vector<int> idx(d);
      idx[canon.a0] = canon.e0 ? ext - 1 : 0;
      idx[canon.a1] = canon.e1 ? ext - 1 : 0;
      bool dropped = false;
      for (int i = 1; i <= ext - 2; ++i) {
        idx[tangent] = i;
        std::int32_t g = mapper.global_of(canon.patch, mapper.flat_of(canon.patch, idx));
        if (g < 0) {
          dropped = true;
          break;
        }
        piece.dofs.push_back(g);
      }
      if (!dropped && !piece.dofs.empty()) pieces.push_back(std::move(piece));
    }
  }

  // vertex pieces: shared patch corners
  {
    std::set<std::int32_t> seen;
    std::vector<std::int32_t> verts;
    for (int k = 0; k < K; ++k) {
      for (int corner = 0; corner < (1 << d); ++corner) {
        std::vector<int> idx(d);
        for (int a = 0; a < d; ++a) idx[a] = (corner >> a) & 1 ? ext - 1 : 0;
        std::int32_t g = mapper.global_of(k, mapper.flat_of(k, idx));
        if (g < 0 || mapper.rep_count(g) < 2) continue;
        if (seen.insert(g).second) verts.push_back(g);
      }
    }
    std::sort(verts.begin(), verts.end());
    for (std::int32_t g : verts) {
      Piece piece;
      piece.kind = PieceKind::vertex;
      piece.patch = mapper.owner_patch(g);
      piece.dofs.push_back(g);
      pieces.push_back(std::move(piece));
    }
  }

  return pieces;
}

}  // namespace patchmg
