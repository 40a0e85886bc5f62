#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <memory>
#include <vector>

#include "patchmg/assembly.hpp"
#include "patchmg/errors.hpp"
#include "patchmg/smoother.hpp"
#include "patchmg/topology.hpp"
#include "patchmg/transfer.hpp"

namespace patchmg {

/// Cycle configuration: nu pre/post smoothing steps, mu recursive coarse calls
/// (1 = V, 2 = W), smoother damping tau, interior shift scale, and whether the
/// coarse correction is damped by tau as well (off by default).
struct CycleParams {
  int nu = 1;
  int mu = 1;
  double tau = 0.25;
  double sigma_scale = 0.2;
  bool damp_coarse = false;
};

struct SolveReport {
  int iterations = 0;
  std::vector<double> residual_history;  // ||r_k||_2 including k = 0
  double t_setup = 0.0;
  double t_assemble = 0.0;
  double t_solve = 0.0;
};

/// Grid hierarchy for one domain: per-level dof mappers, stiffness operators,
/// smoothers, transfers, and the factorized coarsest-level matrix.  Level l
/// has 2^l elements per patch direction; level 0 is one element per patch.
/// The domain is copied in, so mappers and transfers stay valid for the
/// hierarchy's lifetime no matter what the caller does with its copy.
class Hierarchy {
 public:
  Hierarchy(const MultiPatchDomain& domain, int degree, int levels, CycleParams params = {});

  int num_levels() const { return int(mappers_.size()); }  // L + 1
  int finest_level() const { return num_levels() - 1; }
  const MultiPatchDomain& domain() const { return *domain_; }
  int degree() const { return mappers_.front()->degree(); }
  const CycleParams& params() const { return params_; }
  const DofMapper& mapper(int level) const { return *mappers_[level]; }
  const MultiPatchOperator& op(int level) const { return ops_[level]; }
  const HybridSmoother& smoother(int level) const { return smoothers_[level]; }
  /// Transfer between level-1 and level (level >= 1).
  const TransferOperator& transfer(int level) const { return transfers_[level - 1]; }

  double setup_seconds() const { return setup_seconds_; }
  double assemble_seconds() const { return assemble_seconds_; }

  /// Exact solve with the factorized coarsest-level matrix.
  Eigen::VectorXd coarse_solve(const Eigen::VectorXd& rhs) const;

 private:
  std::unique_ptr<MultiPatchDomain> domain_;
  CycleParams params_;
  std::vector<std::unique_ptr<DofMapper>> mappers_;
  std::vector<MultiPatchOperator> ops_;
  std::vector<HybridSmoother> smoothers_;
  std::vector<TransferOperator> transfers_;
  bool coarse_dense_ = false;
  Eigen::LLT<Eigen::MatrixXd> coarse_llt_;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> coarse_sparse_;
  double setup_seconds_ = 0.0;
  double assemble_seconds_ = 0.0;
};

/// Serial realization of the cycle's vector algebra: accumulated and
/// distributed vectors are both plain global dof vectors (a distributed vector
/// is stored already summed), so accumulation is the identity.
class SerialBackend {
 public:
  using AccVec = Eigen::VectorXd;
  using DistVec = Eigen::VectorXd;

  explicit SerialBackend(const Hierarchy& h) : h_(&h) {}

  const CycleParams& params() const { return h_->params(); }
  int finest_level() const { return h_->finest_level(); }

  AccVec zero_acc(int level) const {
    return Eigen::VectorXd::Zero(h_->mapper(level).num_dofs());
  }
  DistVec apply_op(int level, const AccVec& u) const { return h_->op(level).apply(u); }
  DistVec residual(int level, const DistVec& f, const AccVec& u) const {
    return f - h_->op(level).apply(u);
  }
  AccVec accumulate(int, const DistVec& r) const { return r; }
  /// Accumulated L^{-1} r, no damping.
  AccVec smooth(int level, const DistVec& r) const { return h_->smoother(level).apply(r); }
  DistVec restrict_residual(int level, const DistVec& r) const {
    return h_->transfer(level).restrict_full(r);
  }
  void add_prolonged(int level, const AccVec& coarse, double c, AccVec& u) const {
    u += c * h_->transfer(level).prolong(coarse);
  }
  AccVec coarse_solve(const DistVec& r) const { return h_->coarse_solve(r); }
  double dot(int, const DistVec& a, const AccVec& b) const { return a.dot(b); }
  void axpy_acc(double a, const AccVec& x, AccVec& y) const { y += a * x; }
  void axpy_dist(double a, const DistVec& x, DistVec& y) const { y += a * x; }
  void xpay_acc(const AccVec& z, double beta, AccVec& p) const { p = z + beta * p; }

 private:
  const Hierarchy* h_;
};

/// One multigrid cycle at `level`, in place on u: nu damped smoothing steps,
/// coarse correction (exact solve below level 1, mu recursive calls
/// otherwise), nu more smoothing steps.  The same template drives the serial
/// and the rank-parallel backends.
template <class Backend>
void mg_cycle_generic(const Backend& b, int level, typename Backend::AccVec& u,
                      const typename Backend::DistVec& f) {
  const CycleParams& prm = b.params();
  for (int i = 0; i < prm.nu; ++i) {
    typename Backend::AccVec z = b.smooth(level, b.residual(level, f, u));
    b.axpy_acc(prm.tau, z, u);
  }
  typename Backend::DistVec rc = b.restrict_residual(level, b.residual(level, f, u));
  typename Backend::AccVec p;
  if (level == 1) {
    p = b.coarse_solve(rc);
  } else {
    p = b.zero_acc(level - 1);
    for (int i = 0; i < prm.mu; ++i) mg_cycle_generic(b, level - 1, p, rc);
  }
  b.add_prolonged(level, p, prm.damp_coarse ? prm.tau : 1.0, u);
  for (int i = 0; i < prm.nu; ++i) {
    typename Backend::AccVec z = b.smooth(level, b.residual(level, f, u));
    b.axpy_acc(prm.tau, z, u);
  }
}

/// One cycle from a zero start on the finest level: the PCG preconditioner.
template <class Backend>
typename Backend::AccVec mg_precondition(const Backend& b, const typename Backend::DistVec& r) {
  typename Backend::AccVec z = b.zero_acc(b.finest_level());
  mg_cycle_generic(b, b.finest_level(), z, r);
  return z;
}

/// Preconditioned conjugate gradients on the finest level from a zero start;
/// stops once ||r_k||_2 <= tol ||r_0||_2 and throws DivergenceError when the
/// iteration limit is hit first.  `precond` maps a distributed residual to an
/// accumulated correction and must be symmetric positive definite.
template <class Backend, class Precond>
typename Backend::AccVec pcg_generic(const Backend& b, const typename Backend::DistVec& f,
                                     double tol, int max_iter, const Precond& precond,
                                     std::vector<double>& history) {
  const int L = b.finest_level();
  typename Backend::AccVec u = b.zero_acc(L);
  typename Backend::DistVec r = f;
  auto norm2 = [&](const typename Backend::DistVec& v) {
    return std::sqrt(b.dot(L, v, b.accumulate(L, v)));
  };
  const double r0 = norm2(r);
  history.clear();
  history.push_back(r0);
  if (r0 == 0.0) return u;

  typename Backend::AccVec z = precond(r);
  typename Backend::AccVec p = z;
  double rz = b.dot(L, r, z);
  for (int k = 1; k <= max_iter; ++k) {
    typename Backend::DistVec Ap = b.apply_op(L, p);
    const double pAp = b.dot(L, Ap, p);
    if (!(pAp > 0.0)) throw DefinitenessError("pcg: search direction with nonpositive energy");
    const double alpha = rz / pAp;
    b.axpy_acc(alpha, p, u);
    b.axpy_dist(-alpha, Ap, r);
    const double rn = norm2(r);
    history.push_back(rn);
    if (rn <= tol * r0) return u;
    z = precond(r);
    const double rz_next = b.dot(L, r, z);
    b.xpay_acc(z, rz_next / rz, p);
    rz = rz_next;
  }
  throw DivergenceError("pcg: no convergence within the iteration limit");
}

/// Serial wrappers.
Eigen::VectorXd smooth_step(const Hierarchy& h, int level, Eigen::VectorXd u,
                            const Eigen::VectorXd& f);
Eigen::VectorXd mg_cycle(const Hierarchy& h, int level, Eigen::VectorXd u,
                         const Eigen::VectorXd& f);
Eigen::VectorXd pcg_solve(const Hierarchy& h, const Eigen::VectorXd& f, double tol = 1e-8,
                          int max_iter = 500, SolveReport* report = nullptr);

}  // namespace patchmg
