#include "patchmg/geometry.hpp"

#include <cmath>

#include "patchmg/errors.hpp"
#include "patchmg/tensor.hpp"

namespace patchmg {

GeometryMap::GeometryMap(std::vector<UnivariateSpace> spaces, Eigen::MatrixXd control_points)
    : spaces_(std::move(spaces)), control_points_(std::move(control_points)) {
  if (spaces_.empty() || spaces_.size() > 3) throw DomainError("GeometryMap: dimension must be 1..3");
  std::int64_t total = 1;
  for (const auto& s : spaces_) {
    if (s.dimension() != s.full_dimension())
      throw DomainError("GeometryMap: geometry spaces must have free ends");
    total *= s.dimension();
  }
  if (control_points_.rows() != total || control_points_.cols() != Eigen::Index(spaces_.size()))
    throw DomainError("GeometryMap: control point shape mismatch");
}

namespace {

// Accumulate sum over the local tensor support of per-direction basis values.
template <class F>
void support_sweep(const std::vector<UnivariateSpace>& spaces,
                   const std::vector<BasisEval>& evals, F&& f) {
  const int d = int(spaces.size());
  std::vector<int> counts(d);
  for (int a = 0; a < d; ++a) counts[a] = spaces[a].degree() + 1;
  std::vector<int> it(d, 0);
  for (;;) {
    std::int64_t flat = 0;
    double w = 1.0;
    for (int a = d - 1; a >= 0; --a) flat = flat * spaces[a].full_dimension() + (evals[a].first_index + it[a]);
    for (int a = 0; a < d; ++a) w *= evals[a].values[it[a]];
    f(flat, w, it);
    int a = 0;
    for (; a < d; ++a) {
      if (++it[a] < counts[a]) break;
      it[a] = 0;
    }
    if (a == d) break;
  }
}

}  // namespace

Eigen::VectorXd GeometryMap::eval(const Eigen::VectorXd& param) const {
  const int d = dim();
  if (param.size() != d) throw DomainError("GeometryMap::eval: bad parameter size");
  std::vector<BasisEval> evals;
  for (int a = 0; a < d; ++a) evals.push_back(eval_basis(spaces_[a], param[a], 0));
  Eigen::VectorXd x = Eigen::VectorXd::Zero(d);
  support_sweep(spaces_, evals, [&](std::int64_t flat, double w, const std::vector<int>&) {
    x += w * control_points_.row(flat).transpose();
  });
  return x;
}

Eigen::MatrixXd GeometryMap::jacobian(const Eigen::VectorXd& param) const {
  const int d = dim();
  if (param.size() != d) throw DomainError("GeometryMap::jacobian: bad parameter size");
  std::vector<BasisEval> vals, ders;
  for (int a = 0; a < d; ++a) {
    vals.push_back(eval_basis(spaces_[a], param[a], 0));
    ders.push_back(eval_basis(spaces_[a], param[a], 1));
  }
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(d, d);
  for (int j = 0; j < d; ++j) {
    std::vector<BasisEval> mixed = vals;
    mixed[j] = ders[j];
    support_sweep(spaces_, mixed, [&](std::int64_t flat, double w, const std::vector<int>&) {
      J.col(j) += w * control_points_.row(flat).transpose();
    });
  }
  return J;
}

namespace {

struct DirectionSplit {
  Eigen::MatrixXd refine;           // old ctrl -> refined ctrl
  std::vector<int> segment_start;   // first refined row per segment
  int segment_elements;             // uniform element count per segment
};

// Insert each split plane i/m to multiplicity p and locate the per-segment
// control ranges.  Validates that every segment is open-uniform.
DirectionSplit split_direction(const UnivariateSpace& s, int m) {
  const int p = s.degree();
  std::vector<double> knots = s.knots();
  Eigen::MatrixXd refine =
      Eigen::MatrixXd::Identity(s.full_dimension(), s.full_dimension());

  auto multiplicity = [&](double u) {
    int c = 0;
    for (double t : knots)
      if (std::abs(t - u) < 1e-12) ++c;
    return c;
  };
  for (int i = 1; i < m; ++i) {
    double u = double(i) / m;
    int need = p - multiplicity(u);
    for (int r = 0; r < need; ++r) detail::insert_knot(knots, p, u, refine);
  }

  DirectionSplit out;
  out.refine = refine;
  // Count interior knots within each segment and check uniform spacing.
  int expected = -1;
  int start = 0;
  for (int seg = 0; seg < m; ++seg) {
    double lo = double(seg) / m, hi = double(seg + 1) / m;
    int interior = 0;
    for (double t : knots)
      if (t > lo + 1e-12 && t < hi - 1e-12) ++interior;
    int elems = interior + 1;
    if (expected < 0) expected = elems;
    if (elems != expected)
      throw ConfigError("split: geometry knots incompatible with requested split");
    double step = (hi - lo) / elems;
    for (int e = 1; e < elems; ++e) {
      double want = lo + e * step;
      bool found = false;
      for (double t : knots)
        if (std::abs(t - want) < 1e-10) found = true;
      if (!found) throw ConfigError("split: geometry knots incompatible with requested split");
    }
    out.segment_start.push_back(start);
    start += interior + p;  // consumed per segment boundary crossing
  }
  out.segment_elements = expected;
  return out;
}

}  // namespace

GeometryMap GeometryMap::restrict_to_subcell(const std::vector<int>& cell, int m) const {
  const int d = dim();
  if (int(cell.size()) != d) throw DomainError("restrict_to_subcell: bad cell");
  if (m < 1) throw ConfigError("restrict_to_subcell: m must be >= 1");
  if (m == 1) return *this;

  std::vector<DirectionSplit> splits;
  std::vector<int> refined_dims;
  for (int a = 0; a < d; ++a) {
    splits.push_back(split_direction(spaces_[a], m));
    refined_dims.push_back(int(splits.back().refine.rows()));
  }

  // Refine the control net one direction at a time.
  std::vector<int> dims;
  for (int a = 0; a < d; ++a) dims.push_back(spaces_[a].full_dimension());
  std::int64_t refined_total = 1;
  for (int a = 0; a < d; ++a) refined_total *= refined_dims[a];
  Eigen::MatrixXd refined(refined_total, d);
  for (int c = 0; c < d; ++c) {
    Eigen::VectorXd col = control_points_.col(c);
    std::vector<int> cur = dims;
    for (int a = 0; a < d; ++a) {
      col = apply_along_axis(splits[a].refine, col, cur, a);
      cur[a] = refined_dims[a];
    }
    refined.col(c) = col;
  }

  // Slice the subcell's control box.
  std::vector<UnivariateSpace> sub_spaces;
  std::vector<int> lo(d), box(d);
  for (int a = 0; a < d; ++a) {
    sub_spaces.emplace_back(spaces_[a].degree(), splits[a].segment_elements);
    lo[a] = splits[a].segment_start[cell[a]];
    box[a] = sub_spaces[a].full_dimension();
  }
  std::int64_t total = 1;
  for (int a = 0; a < d; ++a) total *= box[a];
  Eigen::MatrixXd ctrl(total, d);
  std::vector<int> it(d, 0);
  for (std::int64_t f = 0; f < total; ++f) {
    std::int64_t src = 0;
    for (int a = d - 1; a >= 0; --a) src = src * refined_dims[a] + (lo[a] + it[a]);
    ctrl.row(f) = refined.row(src);
    for (int a = 0; a < d; ++a) {
      if (++it[a] < box[a]) break;
      it[a] = 0;
    }
  }
  return GeometryMap(std::move(sub_spaces), std::move(ctrl));
}

GeometryMap GeometryMap::axis_aligned_box(const Eigen::VectorXd& corner,
                                          const Eigen::VectorXd& extent) {
  const int d = int(corner.size());
  std::vector<UnivariateSpace> spaces(d, UnivariateSpace(1, 1));
  Eigen::MatrixXd ctrl(std::int64_t(1) << d, d);
  for (std::int64_t f = 0; f < ctrl.rows(); ++f)
    for (int a = 0; a < d; ++a)
      ctrl(f, a) = corner[a] + (((f >> a) & 1) ? extent[a] : 0.0);
  return GeometryMap(std::move(spaces), std::move(ctrl));
}

}  // namespace patchmg
