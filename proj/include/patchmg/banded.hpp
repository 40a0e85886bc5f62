#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace patchmg {

/// Symmetric banded matrix, lower band stored row-wise:
/// entry (i,j) with j <= i and i-j <= bandwidth lives at data[i*(bw+1) + (i-j)].
class BandedSymMatrix {
 public:
  BandedSymMatrix() = default;
  BandedSymMatrix(int dim, int bandwidth)
      : dim_(dim), bw_(bandwidth), data_(std::size_t(dim) * (bandwidth + 1), 0.0) {}

  int dim() const { return dim_; }
  int bandwidth() const { return bw_; }

  double operator()(int i, int j) const {
    if (j > i) std::swap(i, j);
    if (i - j > bw_) return 0.0;
    return data_[std::size_t(i) * (bw_ + 1) + (i - j)];
  }

  void add(int i, int j, double v) {
    if (j > i) std::swap(i, j);
    data_[std::size_t(i) * (bw_ + 1) + (i - j)] += v;
  }

  Eigen::MatrixXd to_dense() const;
  Eigen::VectorXd multiply(const Eigen::VectorXd& x) const;

  /// this = alpha*A + beta*B (shapes must agree; result bandwidth is the max).
  static BandedSymMatrix combine(double alpha, const BandedSymMatrix& A, double beta,
                                 const BandedSymMatrix& B);

 private:
  int dim_ = 0;
  int bw_ = 0;
  std::vector<double> data_;
};

/// Cholesky factorization of a positive definite banded matrix.
/// Throws DefinitenessError if a pivot is not strictly positive.
class BandedCholesky {
 public:
  BandedCholesky() = default;
  explicit BandedCholesky(const BandedSymMatrix& a);

  int dim() const { return dim_; }
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

 private:
  int dim_ = 0;
  int bw_ = 0;
  std::vector<double> l_;  // same layout as BandedSymMatrix
};

}  // namespace patchmg
