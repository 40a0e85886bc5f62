#include "patchmg/banded.hpp"

#include <algorithm>
#include <cmath>

#include "patchmg/errors.hpp"

namespace patchmg {

Eigen::MatrixXd BandedSymMatrix::to_dense() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim_, dim_);
  for (int i = 0; i < dim_; ++i)
    for (int j = std::max(0, i - bw_); j <= i; ++j) m(i, j) = m(j, i) = (*this)(i, j);
  return m;
}

Eigen::VectorXd BandedSymMatrix::multiply(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(dim_);
  for (int i = 0; i < dim_; ++i) {
    double di = data_[std::size_t(i) * (bw_ + 1)];
    y[i] += di * x[i];
    for (int k = 1; k <= std::min(bw_, i); ++k) {
      double v = data_[std::size_t(i) * (bw_ + 1) + k];
      y[i] += v * x[i - k];
      y[i - k] += v * x[i];
    }
  }
  return y;
}

BandedSymMatrix BandedSymMatrix::combine(double alpha, const BandedSymMatrix& A, double beta,
                                         const BandedSymMatrix& B) {
  if (A.dim() != B.dim()) throw DomainError("BandedSymMatrix::combine: dimension mismatch");
  BandedSymMatrix out(A.dim(), std::max(A.bandwidth(), B.bandwidth()));
  for (int i = 0; i < out.dim(); ++i)
    for (int j = std::max(0, i - out.bw_); j <= i; ++j) {
      double v = alpha * A(i, j) + beta * B(i, j);
      if (v != 0.0) out.add(i, j, v);
    }
  return out;
}

BandedCholesky::BandedCholesky(const BandedSymMatrix& a)
    : dim_(a.dim()), bw_(a.bandwidth()), l_(std::size_t(a.dim()) * (a.bandwidth() + 1), 0.0) {
  const int w = bw_ + 1;
  for (int i = 0; i < dim_; ++i) {
    for (int j = std::max(0, i - bw_); j <= i; ++j) {
      double sum = a(i, j);
      int k0 = std::max({0, i - bw_, j - bw_});
      for (int k = k0; k < j; ++k) sum -= l_[std::size_t(i) * w + (i - k)] * l_[std::size_t(j) * w + (j - k)];
      if (i == j) {
        if (sum <= 0.0) throw DefinitenessError("banded Cholesky: non-positive pivot");
        l_[std::size_t(i) * w] = std::sqrt(sum);
      } else {
        l_[std::size_t(i) * w + (i - j)] = sum / l_[std::size_t(j) * w];
      }
    }
  }
}

Eigen::VectorXd BandedCholesky::solve(const Eigen::VectorXd& rhs) const {
  if (rhs.size() != dim_) throw DomainError("BandedCholesky::solve: size mismatch");
  const int w = bw_ + 1;
  Eigen::VectorXd y(dim_);
  for (int i = 0; i < dim_; ++i) {
    double s = rhs[i];
    for (int k = std::max(0, i - bw_); k < i; ++k) s -= l_[std::size_t(i) * w + (i - k)] * y[k];
    y[i] = s / l_[std::size_t(i) * w];
  }
  for (int i = dim_ - 1; i >= 0; --i) {
    double s = y[i];
    for (int k = i + 1; k < std::min(dim_, i + bw_ + 1); ++k)
      s -= l_[std::size_t(k) * w + (k - i)] * y[k];
    y[i] = s / l_[std::size_t(i) * w];
  }
  return y;
}

}  // namespace patchmg
