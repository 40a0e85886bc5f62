#include "patchmg/transfer.hpp"

#include <vector>

#include "patchmg/errors.hpp"
#include "patchmg/tensor.hpp"

namespace patchmg {

TransferOperator::TransferOperator(const DofMapper& coarse, const DofMapper& fine)
    : coarse_(&coarse), fine_(&fine) {
  if (&coarse.domain() != &fine.domain())
    throw DomainError("transfer: levels must share the domain");
  if (coarse.degree() != fine.degree())
    throw DomainError("transfer: levels must share the degree");
  if (fine.elements() != 2 * coarse.elements())
    throw DomainError("transfer: fine level must have twice the elements");
  two_scale_ = two_scale_matrix(UnivariateSpace(coarse.degree(), coarse.elements()));
}

void TransferOperator::prolong_patch(int patch, const Eigen::VectorXd& coarse_acc,
                                     Eigen::VectorXd& fine_lattice) const {
  const int d = coarse_->domain().dim;
  const int ext_c = coarse_->extent();
  std::int64_t total = 1;
  for (int a = 0; a < d; ++a) total *= ext_c;

  Eigen::VectorXd work(total);
  const auto& l2g = coarse_->local_to_global(patch);
  for (std::int64_t f = 0; f < total; ++f) work[f] = l2g[f] >= 0 ? coarse_acc[l2g[f]] : 0.0;

  std::vector<int> dims(d, ext_c);
  for (int a = 0; a < d; ++a) {
    work = apply_along_axis(two_scale_, work, dims, a);
    dims[a] = two_scale_.fine_dim;
  }
  fine_lattice = std::move(work);
}

Eigen::VectorXd TransferOperator::prolong(const Eigen::VectorXd& coarse_acc) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(fine_->num_dofs());
  Eigen::VectorXd lattice;
  for (int k = 0; k < coarse_->domain().num_patches(); ++k) {
    prolong_patch(k, coarse_acc, lattice);
    const auto& l2g = fine_->local_to_global(k);
    for (std::int64_t f = 0; f < lattice.size(); ++f) {
      std::int32_t g = l2g[f];
      if (g >= 0 && fine_->owner_patch(g) == k) out[g] = lattice[f];
    }
  }
  return out;
}

void TransferOperator::restrict_patch(int patch, const Eigen::VectorXd& fine_lattice_share,
                                      Eigen::VectorXd& coarse_lattice_share) const {
  (void)patch;
  const int d = coarse_->domain().dim;
  const int ext_f = fine_->extent();
  std::vector<int> dims(d, ext_f);
  Eigen::VectorXd work = fine_lattice_share;
  for (int a = 0; a < d; ++a) {
    work = apply_along_axis_transpose(two_scale_, work, dims, a);
    dims[a] = two_scale_.coarse_dim;
  }
  coarse_lattice_share = std::move(work);
}

Eigen::VectorXd TransferOperator::restrict_full(const Eigen::VectorXd& fine_summed) const {
  const int d = coarse_->domain().dim;
  std::int64_t total_f = 1, total_c = 1;
  for (int a = 0; a < d; ++a) {
    total_f *= fine_->extent();
    total_c *= coarse_->extent();
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(coarse_->num_dofs());
  Eigen::VectorXd share(total_f), cshare;
  for (int k = 0; k < coarse_->domain().num_patches(); ++k) {
    const auto& l2g_f = fine_->local_to_global(k);
    for (std::int64_t f = 0; f < total_f; ++f) {
      std::int32_t g = l2g_f[f];
      share[f] = (g >= 0 && fine_->owner_patch(g) == k) ? fine_summed[g] : 0.0;
    }
    restrict_patch(k, share, cshare);
    const auto& l2g_c = coarse_->local_to_global(k);
    for (std::int64_t c = 0; c < total_c; ++c) {
      std::int32_t g = l2g_c[c];
      if (g >= 0) out[g] += cshare[c];
    }
  }
  return out;
}

Eigen::SparseMatrix<double> TransferOperator::explicit_matrix() const {
  const int d = coarse_->domain().dim;
  const int ext_c = coarse_->extent();
  const int ext_f = fine_->extent();
  std::vector<Eigen::Triplet<double>> trips;

  for (int k = 0; k < coarse_->domain().num_patches(); ++k) {
    const auto& l2g_f = fine_->local_to_global(k);
    const auto& l2g_c = coarse_->local_to_global(k);
    std::vector<int> fi(d, 0);
    std::int64_t total_f = 1;
    for (int a = 0; a < d; ++a) total_f *= ext_f;
    for (std::int64_t f = 0; f < total_f; ++f) {
      std::int32_t g = l2g_f[f];
      if (g >= 0 && fine_->owner_patch(g) == k) {
        // tensor row: outer product of the per-direction two-scale rows
        std::vector<int> ci(d, 0);
        for (;;) {
          double v = 1.0;
          std::int64_t cflat = 0;
          bool live = true;
          for (int a = d - 1; a >= 0 && live; --a) {
            int col = two_scale_.row_start[fi[a]] + ci[a];
            if (col >= ext_c) {
              live = false;
              break;
            }
            v *= two_scale_.row_vals[fi[a]][ci[a]];
            cflat = cflat * ext_c + col;
          }
          if (live && v != 0.0 && l2g_c[cflat] >= 0) trips.push_back({g, l2g_c[cflat], v});
          int a = 0;
          for (; a < d; ++a) {
            if (++ci[a] < int(two_scale_.row_vals[fi[a]].size())) break;
            ci[a] = 0;
          }
          if (a == d) break;
        }
      }
      for (int a = 0; a < d; ++a) {
        if (++fi[a] < ext_f) break;
        fi[a] = 0;
      }
    }
  }
  Eigen::SparseMatrix<double> out(fine_->num_dofs(), coarse_->num_dofs());
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

}  // namespace patchmg
