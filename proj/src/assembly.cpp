#include "patchmg/assembly.hpp"

#include <algorithm>
#include <cmath>

#include "patchmg/errors.hpp"
#include "patchmg/quadrature.hpp"
#include "patchmg/tensor.hpp"

namespace patchmg {

void PatchOperator::apply_add(const double* x, double* y) const {
  for (std::int64_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::int64_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) acc += vals[k] * x[cols[k]];
    y[r] += acc;
  }
}

Eigen::MatrixXd PatchOperator::to_dense() const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows, rows);
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) out(r, cols[k]) += vals[k];
  return out;
}

namespace {

/// Per-direction basis tables of the full (no elimination) space at the
/// Gauss-Legendre points of each 1D element: values(k, q) and first
/// derivatives, local function k = 0..p supported on element e.
struct BasisTables {
  int degree, elements, points;
  std::vector<Eigen::MatrixXd> values;  // per element, (p+1) x q
  std::vector<Eigen::MatrixXd> derivs;
};

BasisTables tabulate(int degree, int elements, const QuadratureRule& rule) {
  BasisTables t;
  t.degree = degree;
  t.elements = elements;
  t.points = int(rule.nodes.size());
  UnivariateSpace space(degree, elements);
  for (int e = 0; e < elements; ++e) {
    Eigen::MatrixXd v(degree + 1, t.points), d(degree + 1, t.points);
    for (int q = 0; q < t.points; ++q) {
      double x = (e + rule.nodes[q]) / elements;
      BasisEval bv = eval_basis(space, x, 0);
      BasisEval bd = eval_basis(space, x, 1);
      for (int k = 0; k <= degree; ++k) {
        v(k, q) = bv.values[k];
        d(k, q) = bd.values[k];
      }
    }
    t.values.push_back(std::move(v));
    t.derivs.push_back(std::move(d));
  }
  return t;
}

/// Tensor-band CSR pattern over the full lattice: row (i_0..i_{d-1}) holds the
/// box of columns within degree distance per direction.
void build_pattern(PatchOperator& op, int dim, int ext, int degree) {
  std::int64_t nrows = 1;
  for (int a = 0; a < dim; ++a) nrows *= ext;
  op.rows = nrows;
  op.row_ptr.assign(nrows + 1, 0);

  std::vector<int> idx(dim, 0);
  for (std::int64_t r = 0; r < nrows; ++r) {
    std::int64_t nnz = 1;
    for (int a = 0; a < dim; ++a) {
      int lo = std::max(0, idx[a] - degree);
      int hi = std::min(ext - 1, idx[a] + degree);
      nnz *= hi - lo + 1;
    }
    op.row_ptr[r + 1] = op.row_ptr[r] + nnz;
    for (int a = 0; a < dim; ++a) {
      if (++idx[a] < ext) break;
      idx[a] = 0;
    }
  }
  op.cols.resize(op.row_ptr[nrows]);
  op.vals.assign(op.row_ptr[nrows], 0.0);

  std::fill(idx.begin(), idx.end(), 0);
  for (std::int64_t r = 0; r < nrows; ++r) {
    std::int64_t at = op.row_ptr[r];
    std::vector<int> lo(dim), hi(dim), j(dim);
    for (int a = 0; a < dim; ++a) {
      lo[a] = std::max(0, idx[a] - degree);
      hi[a] = std::min(ext - 1, idx[a] + degree);
      j[a] = lo[a];
    }
    for (;;) {
      std::int64_t c = 0;
      for (int a = dim - 1; a >= 0; --a) c = c * ext + j[a];
      op.cols[at++] = std::int32_t(c);
      int a = 0;
      for (; a < dim; ++a) {
        if (++j[a] <= hi[a]) break;
        j[a] = lo[a];
      }
      if (a == dim) break;
    }
    for (int a = 0; a < dim; ++a) {
      if (++idx[a] < ext) break;
      idx[a] = 0;
    }
  }
}

/// Value position of (row multi-index, col multi-index) inside the CSR row.
inline std::int64_t pattern_offset(const std::vector<int>& row, const std::vector<int>& col,
                                   int dim, int ext, int degree) {
  std::int64_t off = 0;
  for (int a = dim - 1; a >= 0; --a) {
    int lo = std::max(0, row[a] - degree);
    int hi = std::min(ext - 1, row[a] + degree);
    off = off * (hi - lo + 1) + (col[a] - lo);
  }
  return off;
}

}  // namespace

PatchOperator assemble_patch_stiffness(const GeometryMap& geo, int degree, int elements) {
  const int d = geo.dim();
  const int p = degree;
  const int ext = elements + degree;
  const QuadratureRule& rule = gauss_legendre(p + 1);
  const int q1 = int(rule.nodes.size());
  BasisTables tab = tabulate(p, elements, rule);

  PatchOperator op;
  build_pattern(op, d, ext, p);

  const int nloc = [&] {
    int v = 1;
    for (int a = 0; a < d; ++a) v *= p + 1;
    return v;
  }();
  const int nq = [&] {
    int v = 1;
    for (int a = 0; a < d; ++a) v *= q1;
    return v;
  }();

  Eigen::MatrixXd G(nloc, d * nq);   // gradient components, stacked over q blocks
  Eigen::MatrixXd H(nloc, d * nq);   // coefficient-transformed gradients
  Eigen::MatrixXd E(nloc, nloc);     // element matrix
  Eigen::VectorXd param(d);
  std::vector<double> coeff(std::size_t(nq) * d * d);  // w |detJ| J^-1 J^-T per point
  double det_sign = 0.0;  // jacobian determinant must keep one sign per patch

  std::vector<int> ecell(d, 0);
  std::int64_t ecount = 1;
  for (int a = 0; a < d; ++a) ecount *= elements;

  for (std::int64_t e = 0; e < ecount; ++e) {
    // quadrature geometry pass
    std::vector<int> qidx(d, 0);
    for (int q = 0; q < nq; ++q) {
      double w = 1.0;
      for (int a = 0; a < d; ++a) {
        param[a] = (ecell[a] + rule.nodes[qidx[a]]) / elements;
        w *= rule.weights[qidx[a]] / elements;
      }
      Eigen::MatrixXd J = geo.jacobian(param);
      double det = J.determinant();
      if (det_sign == 0.0) det_sign = det > 0.0 ? 1.0 : -1.0;
      if (!(det * det_sign > 1e-14))
        throw SingularGeometryError("assembly: degenerate or folded geometry map");
      Eigen::MatrixXd Ji = J.inverse();
      Eigen::MatrixXd C = (w * std::abs(det)) * (Ji * Ji.transpose());
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) coeff[(std::size_t(q) * d + a) * d + b] = C(a, b);
      for (int a = 0; a < d; ++a) {
        if (++qidx[a] < q1) break;
        qidx[a] = 0;
      }
    }

    // local gradient tables: G_a(i, q) = d_a N_i(x_q)
    std::vector<int> li(d, 0);
    for (int i = 0; i < nloc; ++i) {
      std::fill(qidx.begin(), qidx.end(), 0);
      for (int q = 0; q < nq; ++q) {
        for (int a = 0; a < d; ++a) {
          double g = 1.0;
          for (int b = 0; b < d; ++b) {
            const Eigen::MatrixXd& t =
                (b == a) ? tab.derivs[ecell[b]] : tab.values[ecell[b]];
            g *= t(li[b], qidx[b]);
          }
          G(i, a * nq + q) = g;
        }
        for (int a = 0; a < d; ++a) {
          if (++qidx[a] < q1) break;
          qidx[a] = 0;
        }
      }
      for (int a = 0; a < d; ++a) {
        if (++li[a] <= p) break;
        li[a] = 0;
      }
    }

    // H_a(:, q) = sum_b C_ab(q) G_b(:, q)
    for (int a = 0; a < d; ++a)
      for (int q = 0; q < nq; ++q) {
        auto h = H.col(a * nq + q);
        h = coeff[(std::size_t(q) * d + a) * d] * G.col(q);
        for (int b = 1; b < d; ++b)
          h += coeff[(std::size_t(q) * d + a) * d + b] * G.col(b * nq + q);
      }

    E.noalias() = G * H.transpose();

    // scatter into the CSR block
    std::vector<int> ri(d), ci(d);
    std::fill(li.begin(), li.end(), 0);
    for (int i = 0; i < nloc; ++i) {
      for (int a = 0; a < d; ++a) ri[a] = ecell[a] + li[a];
      std::int64_t r = 0;
      for (int a = d - 1; a >= 0; --a) r = r * ext + ri[a];
      std::vector<int> lj(d, 0);
      for (int j = 0; j < nloc; ++j) {
        for (int a = 0; a < d; ++a) ci[a] = ecell[a] + lj[a];
        op.vals[op.row_ptr[r] + pattern_offset(ri, ci, d, ext, p)] += E(i, j);
        for (int a = 0; a < d; ++a) {
          if (++lj[a] <= p) break;
          lj[a] = 0;
        }
      }
      for (int a = 0; a < d; ++a) {
        if (++li[a] <= p) break;
        li[a] = 0;
      }
    }

    for (int a = 0; a < d; ++a) {
      if (++ecell[a] < elements) break;
      ecell[a] = 0;
    }
  }
  return op;
}

MultiPatchOperator assemble_stiffness(const DofMapper& mapper) {
  const MultiPatchDomain& dom = mapper.domain();
  std::vector<PatchOperator> blocks;
  blocks.reserve(dom.num_patches());
  for (int k = 0; k < dom.num_patches(); ++k)
    blocks.push_back(assemble_patch_stiffness(dom.patches[k], mapper.degree(), mapper.elements()));
  return MultiPatchOperator(mapper, std::move(blocks));
}

MultiPatchOperator::MultiPatchOperator(const DofMapper& mapper, std::vector<PatchOperator> blocks)
    : mapper_(&mapper), blocks_(std::move(blocks)) {
  if (int(blocks_.size()) != mapper.domain().num_patches())
    throw DomainError("MultiPatchOperator: one block per patch required");
}

Eigen::VectorXd MultiPatchOperator::apply(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(mapper_->num_dofs());
  std::vector<double> xl, yl;
  for (int k = 0; k < int(blocks_.size()); ++k) {
    const auto& l2g = mapper_->local_to_global(k);
    const PatchOperator& blk = blocks_[k];
    xl.assign(blk.rows, 0.0);
    yl.assign(blk.rows, 0.0);
    for (std::int64_t f = 0; f < blk.rows; ++f)
      if (l2g[f] >= 0) xl[f] = x[l2g[f]];
    blk.apply_add(xl.data(), yl.data());
    for (std::int64_t f = 0; f < blk.rows; ++f)
      if (l2g[f] >= 0) y[l2g[f]] += yl[f];
  }
  return y;
}

Eigen::SparseMatrix<double> MultiPatchOperator::assemble_global() const {
  std::vector<Eigen::Triplet<double>> trips;
  for (int k = 0; k < int(blocks_.size()); ++k) {
    const auto& l2g = mapper_->local_to_global(k);
    const PatchOperator& blk = blocks_[k];
    for (std::int64_t r = 0; r < blk.rows; ++r) {
      if (l2g[r] < 0) continue;
      for (std::int64_t c = blk.row_ptr[r]; c < blk.row_ptr[r + 1]; ++c)
        if (l2g[blk.cols[c]] >= 0)
          trips.push_back({l2g[r], l2g[blk.cols[c]], blk.vals[c]});
    }
  }
  Eigen::SparseMatrix<double> out(mapper_->num_dofs(), mapper_->num_dofs());
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

Eigen::VectorXd assemble_rhs(const DofMapper& mapper,
                             const std::function<double(const Eigen::VectorXd&)>& f) {
  const MultiPatchDomain& dom = mapper.domain();
  const int d = dom.dim;
  const int p = mapper.degree();
  const int n = mapper.elements();
  const int ext = mapper.extent();
  const QuadratureRule& rule = gauss_legendre(p + 1);
  const int q1 = int(rule.nodes.size());

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(mapper.num_dofs());
  BasisTables tab = tabulate(p, n, rule);
  Eigen::VectorXd param(d);

  for (int k = 0; k < dom.num_patches(); ++k) {
    const GeometryMap& geo = dom.patches[k];
    const auto& l2g = mapper.local_to_global(k);
    double det_sign = 0.0;
    std::vector<int> ecell(d, 0);
    std::int64_t ecount = 1;
    for (int a = 0; a < d; ++a) ecount *= n;
    for (std::int64_t e = 0; e < ecount; ++e) {
      std::vector<int> qidx(d, 0);
      std::int64_t nq = 1;
      for (int a = 0; a < d; ++a) nq *= q1;
      for (std::int64_t q = 0; q < nq; ++q) {
        double w = 1.0;
        for (int a = 0; a < d; ++a) {
          param[a] = (ecell[a] + rule.nodes[qidx[a]]) / n;
          w *= rule.weights[qidx[a]] / n;
        }
        Eigen::MatrixXd J = geo.jacobian(param);
        double det = J.determinant();
        if (det_sign == 0.0) det_sign = det > 0.0 ? 1.0 : -1.0;
        if (!(det * det_sign > 1e-14))
          throw SingularGeometryError("assembly: degenerate or folded geometry map");
        double fw = w * std::abs(det) * f(geo.eval(param));

        std::vector<int> li(d, 0);
        for (;;) {
          double v = 1.0;
          std::int64_t flat = 0;
          for (int a = d - 1; a >= 0; --a) {
            v *= tab.values[ecell[a]](li[a], qidx[a]);
            flat = flat * ext + (ecell[a] + li[a]);
          }
          if (l2g[flat] >= 0) rhs[l2g[flat]] += fw * v;
          int a = 0;
          for (; a < d; ++a) {
            if (++li[a] <= p) break;
            li[a] = 0;
          }
          if (a == d) break;
        }
        for (int a = 0; a < d; ++a) {
          if (++qidx[a] < q1) break;
          qidx[a] = 0;
        }
      }
      for (int a = 0; a < d; ++a) {
        if (++ecell[a] < n) break;
        ecell[a] = 0;
      }
    }
  }
  return rhs;
}

}  // namespace patchmg
