#include "patchmg/multigrid.hpp"

#include <chrono>
#include <utility>

namespace patchmg {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

Hierarchy::Hierarchy(const MultiPatchDomain& domain, int degree, int levels, CycleParams params)
    : domain_(std::make_unique<MultiPatchDomain>(domain)), params_(params) {
  if (levels < 1) throw ConfigError("hierarchy: need at least one refinement level");
  if (params.nu < 1) throw ConfigError("hierarchy: need at least one smoothing step");
  if (params.mu < 1 || params.mu > 2) throw ConfigError("hierarchy: cycle index must be 1 or 2");
  if (params.tau <= 0.0 || params.sigma_scale <= 0.0)
    throw ConfigError("hierarchy: damping and shift scale must be positive");

  using clock = std::chrono::steady_clock;
  auto t0 = clock::now();
  for (int l = 0; l <= levels; ++l)
    mappers_.push_back(std::make_unique<DofMapper>(*domain_, degree, 1 << l));
  for (int l = 1; l <= levels; ++l) transfers_.emplace_back(*mappers_[l - 1], *mappers_[l]);
  for (int l = 0; l <= levels; ++l)
    smoothers_.emplace_back(*mappers_[l], params.tau, params.sigma_scale);
  setup_seconds_ = seconds_since(t0);

  auto t1 = clock::now();
  for (int l = 0; l <= levels; ++l) ops_.push_back(assemble_stiffness(*mappers_[l]));
  assemble_seconds_ = seconds_since(t1);

  auto t2 = clock::now();
  Eigen::SparseMatrix<double> A0 = ops_[0].assemble_global();
  coarse_dense_ = A0.rows() < 500;
  if (coarse_dense_) {
    coarse_llt_.compute(Eigen::MatrixXd(A0));
    if (A0.rows() > 0 && coarse_llt_.info() != Eigen::Success)
      throw DecompositionError("hierarchy: coarse factorization failed");
  } else {
    coarse_sparse_.compute(A0);
    if (coarse_sparse_.info() != Eigen::Success)
      throw DecompositionError("hierarchy: coarse factorization failed");
  }
  setup_seconds_ += seconds_since(t2);
}

Eigen::VectorXd Hierarchy::coarse_solve(const Eigen::VectorXd& rhs) const {
  if (coarse_dense_) return coarse_llt_.solve(rhs);
  return coarse_sparse_.solve(rhs);
}

Eigen::VectorXd smooth_step(const Hierarchy& h, int level, Eigen::VectorXd u,
                            const Eigen::VectorXd& f) {
  SerialBackend b(h);
  Eigen::VectorXd z = b.smooth(level, b.residual(level, f, u));
  u += h.params().tau * z;
  return u;
}

Eigen::VectorXd mg_cycle(const Hierarchy& h, int level, Eigen::VectorXd u,
                         const Eigen::VectorXd& f) {
  SerialBackend b(h);
  mg_cycle_generic(b, level, u, f);
  return u;
}

Eigen::VectorXd pcg_solve(const Hierarchy& h, const Eigen::VectorXd& f, double tol, int max_iter,
                          SolveReport* report) {
  SerialBackend b(h);
  std::vector<double> history;
  auto t0 = std::chrono::steady_clock::now();
  Eigen::VectorXd u = pcg_generic(
      b, f, tol, max_iter, [&](const Eigen::VectorXd& r) { return mg_precondition(b, r); },
      history);
  const double t_solve = seconds_since(t0);
  if (report) {
    report->iterations = int(history.size()) - 1;
    report->residual_history = std::move(history);
    report->t_setup = h.setup_seconds();
    report->t_assemble = h.assemble_seconds();
    report->t_solve = t_solve;
  }
  return u;
}

}  // namespace patchmg
