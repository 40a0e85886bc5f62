#include "patchmg/tensor.hpp"

namespace patchmg {

namespace {

// Walk the tensor as (inner, axis, outer) with inner = prod(dims[<axis]).
template <class Kernel>
void axis_sweep(const std::vector<int>& dims, int axis, Kernel&& k) {
  std::int64_t inner = 1, outer = 1;
  for (int a = 0; a < axis; ++a) inner *= dims[a];
  for (std::size_t a = axis + 1; a < dims.size(); ++a) outer *= dims[a];
  k(inner, outer);
}

}  // namespace

Eigen::VectorXd apply_along_axis(const Eigen::MatrixXd& M, const Eigen::VectorXd& x,
                                 const std::vector<int>& dims, int axis) {
  const int m = dims[axis];
  if (M.cols() != m) throw DomainError("apply_along_axis: extent mismatch");
  const int r = int(M.rows());
  Eigen::VectorXd y;
  axis_sweep(dims, axis, [&](std::int64_t inner, std::int64_t outer) {
    y.setZero(inner * r * outer);
    for (std::int64_t o = 0; o < outer; ++o) {
      Eigen::Map<const Eigen::MatrixXd> xin(x.data() + o * inner * m, inner, m);
      Eigen::Map<Eigen::MatrixXd> yout(y.data() + o * inner * r, inner, r);
      yout.noalias() = xin * M.transpose();
    }
  });
  return y;
}

Eigen::VectorXd apply_along_axis_transpose(const Eigen::MatrixXd& M, const Eigen::VectorXd& x,
                                           const std::vector<int>& dims, int axis) {
  const int m = dims[axis];
  if (M.rows() != m) throw DomainError("apply_along_axis_transpose: extent mismatch");
  const int r = int(M.cols());
  Eigen::VectorXd y;
  axis_sweep(dims, axis, [&](std::int64_t inner, std::int64_t outer) {
    y.setZero(inner * r * outer);
    for (std::int64_t o = 0; o < outer; ++o) {
      Eigen::Map<const Eigen::MatrixXd> xin(x.data() + o * inner * m, inner, m);
      Eigen::Map<Eigen::MatrixXd> yout(y.data() + o * inner * r, inner, r);
      yout.noalias() = xin * M;
    }
  });
  return y;
}

Eigen::VectorXd apply_along_axis(const TwoScaleMatrix& P, const Eigen::VectorXd& x,
                                 const std::vector<int>& dims, int axis) {
  if (P.coarse_dim != dims[axis]) throw DomainError("apply_along_axis: extent mismatch");
  const int m = dims[axis];
  const int r = P.fine_dim;
  Eigen::VectorXd y;
  axis_sweep(dims, axis, [&](std::int64_t inner, std::int64_t outer) {
    y.setZero(inner * r * outer);
    for (std::int64_t o = 0; o < outer; ++o) {
      const double* xin = x.data() + o * inner * m;
      double* yout = y.data() + o * inner * r;
      for (int i = 0; i < r; ++i) {
        const auto& vals = P.row_vals[i];
        const int start = P.row_start[i];
        double* yrow = yout + i * inner;
        for (std::size_t k = 0; k < vals.size(); ++k) {
          const double v = vals[k];
          const double* xrow = xin + (start + k) * inner;
          for (std::int64_t t = 0; t < inner; ++t) yrow[t] += v * xrow[t];
        }
      }
    }
  });
  return y;
}

Eigen::VectorXd apply_along_axis_transpose(const TwoScaleMatrix& P, const Eigen::VectorXd& x,
                                           const std::vector<int>& dims, int axis) {
  if (P.fine_dim != dims[axis]) throw DomainError("apply_along_axis_transpose: extent mismatch");
  const int m = dims[axis];
  const int r = P.coarse_dim;
  Eigen::VectorXd y;
  axis_sweep(dims, axis, [&](std::int64_t inner, std::int64_t outer) {
    y.setZero(inner * r * outer);
    for (std::int64_t o = 0; o < outer; ++o) {
      const double* xin = x.data() + o * inner * m;
      double* yout = y.data() + o * inner * r;
      for (int i = 0; i < m; ++i) {
        const auto& vals = P.row_vals[i];
        const int start = P.row_start[i];
        const double* xrow = xin + i * inner;
        for (std::size_t k = 0; k < vals.size(); ++k) {
          const double v = vals[k];
          double* ycol = yout + (start + k) * inner;
          for (std::int64_t t = 0; t < inner; ++t) ycol[t] += v * xrow[t];
        }
      }
    }
  });
  return y;
}

FastDiagonalSolver::FastDiagonalSolver(const std::vector<Eigen::MatrixXd>& K,
                                       const std::vector<Eigen::MatrixXd>& M, double sigma,
                                       double scale) {
  if (K.size() != M.size() || K.empty()) throw DomainError("FastDiagonalSolver: factor mismatch");
  const int d = int(K.size());
  std::vector<Eigen::VectorXd> lambdas(d);
  total_ = 1;
  for (int a = 0; a < d; ++a) {
    GenEigDecomposition ge = gen_eig(K[a], M[a]);
    vecs_.push_back(ge.eigenvectors);
    minv_vecs_.push_back(M[a] * ge.eigenvectors);
    lambdas[a] = ge.eigenvalues;
    dims_.push_back(int(ge.eigenvalues.size()));
    total_ *= dims_.back();
  }
  diag_.resize(total_);
  std::vector<int> idx(d, 0);
  for (int f = 0; f < total_; ++f) {
    double s = sigma;
    for (int a = 0; a < d; ++a) s += lambdas[a][idx[a]];
    diag_[f] = scale * s;
    for (int a = 0; a < d; ++a) {
      if (++idx[a] < dims_[a]) break;
      idx[a] = 0;
    }
  }
}

Eigen::VectorXd FastDiagonalSolver::solve(const Eigen::VectorXd& rhs) const {
  if (rhs.size() != total_) throw DomainError("FastDiagonalSolver::solve: size mismatch");
  Eigen::VectorXd w = rhs;
  for (std::size_t a = 0; a < vecs_.size(); ++a)
    w = apply_along_axis_transpose(vecs_[a], w, dims_, int(a));
  w.array() /= diag_.array();
  for (std::size_t a = 0; a < vecs_.size(); ++a) w = apply_along_axis(vecs_[a], w, dims_, int(a));
  return w;
}

Eigen::VectorXd FastDiagonalSolver::multiply(const Eigen::VectorXd& x) const {
  if (x.size() != total_) throw DomainError("FastDiagonalSolver::multiply: size mismatch");
  // L = (x_a M_a V_a) diag (x_a V_a^T M_a) by V^T M V = I.
  Eigen::VectorXd w = x;
  for (std::size_t a = 0; a < vecs_.size(); ++a)
    w = apply_along_axis_transpose(minv_vecs_[a], w, dims_, int(a));
  w.array() *= diag_.array();
  for (std::size_t a = 0; a < vecs_.size(); ++a)
    w = apply_along_axis(minv_vecs_[a], w, dims_, int(a));
  return w;
}

}  // namespace patchmg
