#include "patchmg/harness.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <ostream>
#include <random>

#include "patchmg/errors.hpp"
#include "patchmg/parallel.hpp"
#include "patchmg/spline.hpp"
#include "patchmg/transfer.hpp"

#ifdef PATCHMG_WITH_MPI
#include <mpi.h>

#include "patchmg/mpi_comm.hpp"
#endif

namespace patchmg {

namespace {

double sine_rhs_2d(const Eigen::VectorXd& x) {
  return 50.0 * M_PI * M_PI * std::sin(5 * M_PI * x[0]) * std::sin(5 * M_PI * x[1]);
}

double sine_rhs_3d(const Eigen::VectorXd& x) {
  return 75.0 * M_PI * M_PI * std::sin(5 * M_PI * x[0]) * std::sin(5 * M_PI * x[1]) *
         std::sin(5 * M_PI * x[2]);
}

Eigen::VectorXd dvec(std::initializer_list<double> entries) {
  Eigen::VectorXd v(Eigen::Index(entries.size()));
  Eigen::Index i = 0;
  for (double e : entries) v[i++] = e;
  return v;
}

/// Comma-separated positive integers; `what` names the field in errors.
std::vector<int> parse_int_list(const std::string& text, const std::string& what) {
  std::vector<int> values;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t comma = text.find(',', start);
    std::string token = text.substr(start, comma == std::string::npos ? comma : comma - start);
    std::size_t lo = token.find_first_not_of(" \t");
    std::size_t hi = token.find_last_not_of(" \t");
    if (lo == std::string::npos)
      throw ConfigError(what + ": empty entry in list '" + text + "'");
    token = token.substr(lo, hi - lo + 1);
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(token, &used);
    } catch (const std::exception&) {
      throw ConfigError(what + ": bad integer '" + token + "'");
    }
    if (used != token.size()) throw ConfigError(what + ": bad integer '" + token + "'");
    if (v < 1) throw ConfigError(what + ": entries must be positive, got " + token);
    values.push_back(v);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return values;
}

}  // namespace

BackendKind backend_from_name(const std::string& name) {
  if (name == "loopback") return BackendKind::loopback;
  if (name == "inproc") return BackendKind::inproc;
  if (name == "mpi") return BackendKind::mpi;
  throw ConfigError("backend: expected loopback, inproc, or mpi, got '" + name + "'");
}

const char* backend_name(BackendKind kind) {
  switch (kind) {
    case BackendKind::loopback: return "loopback";
    case BackendKind::inproc: return "inproc";
    case BackendKind::mpi: return "mpi";
  }
  return "?";
}

CycleParams ExperimentConfig::cycle_params() const {
  CycleParams p;
  p.nu = nu;
  p.mu = cycle_mu;
  p.tau = tau;
  p.sigma_scale = sigma_scale;
  p.damp_coarse = damp_coarse;
  return p;
}

void ExperimentConfig::validate() const {
  auto range = [](const char* name, auto value, auto lo, auto hi) {
    if (value < lo || value > hi)
      throw ConfigError(std::string(name) + ": " + std::to_string(value) + " outside [" +
                        std::to_string(lo) + ", " + std::to_string(hi) + "]");
  };
  range("degree", degree, 1, 8);
  range("levels", levels, 1, 8);
  range("split", split, 1, 8);
  range("cycle", cycle_mu, 1, 2);
  if (nu < 1) throw ConfigError("nu: need at least one smoothing step");
  if (!(tau > 0.0)) throw ConfigError("tau: must be positive");
  if (!(sigma_scale > 0.0)) throw ConfigError("sigma-scale: must be positive");
  if (!(tol > 0.0) || tol >= 1.0) throw ConfigError("tol: must lie in (0, 1)");
  if (max_iter < 1) throw ConfigError("max-iter: must be positive");
  range("ranks", ranks, 1, kMaxRanks);
}

DomainBundle make_fichera() {
  MultiPatchDomain d;
  d.dim = 3;
  for (int cz = 0; cz < 2; ++cz)
    for (int cy = 0; cy < 2; ++cy)
      for (int cx = 0; cx < 2; ++cx) {
        if (cx == 1 && cy == 1 && cz == 1) continue;
        d.patches.push_back(
            GeometryMap::axis_aligned_box(dvec({double(cx), double(cy), double(cz)}),
                                          dvec({1, 1, 1})));
      }
  auto N = SideTag::neumann, D = SideTag::dirichlet;
  for (const GeometryMap& g : d.patches) {
    std::array<SideTag, 6> t = {N, N, N, N, N, N};
    // Dirichlet exactly on the coordinate planes: the lower side of every
    // patch whose corner touches them.
    for (int a = 0; a < 3; ++a)
      if (g.control_points()(0, a) == 0.0) t[side_of(a, 0)] = D;
    d.side_tags.push_back(t);
  }
  build_topology(d);
  return {std::move(d), sine_rhs_3d};
}

DomainBundle make_lshape() {
  MultiPatchDomain d;
  d.dim = 2;
  d.patches.push_back(GeometryMap::axis_aligned_box(dvec({0, 0}), dvec({1, 1})));
  d.patches.push_back(GeometryMap::axis_aligned_box(dvec({1, 0}), dvec({1, 1})));
  d.patches.push_back(GeometryMap::axis_aligned_box(dvec({0, 1}), dvec({1, 1})));
  auto N = SideTag::neumann, D = SideTag::dirichlet;
  d.side_tags.assign(3, {N, N, N, N, N, N});
  d.side_tags[0] = {D, N, D, N, N, N};
  d.side_tags[1] = {N, N, D, N, N, N};
  d.side_tags[2] = {D, N, N, N, N, N};
  build_topology(d);
  return {std::move(d), sine_rhs_2d};
}

DomainBundle make_unit_grid(int kx, int ky, int kz) {
  if (kx < 1 || ky < 1 || kz < 0)
    throw ConfigError("unit_grid: patch counts must be at least 1 per direction");
  MultiPatchDomain d;
  d.dim = kz > 0 ? 3 : 2;
  if (d.dim == 2) {
    for (int j = 0; j < ky; ++j)
      for (int i = 0; i < kx; ++i)
        d.patches.push_back(
            GeometryMap::axis_aligned_box(dvec({double(i), double(j)}), dvec({1, 1})));
  } else {
    for (int k = 0; k < kz; ++k)
      for (int j = 0; j < ky; ++j)
        for (int i = 0; i < kx; ++i)
          d.patches.push_back(GeometryMap::axis_aligned_box(
              dvec({double(i), double(j), double(k)}), dvec({1, 1, 1})));
  }
  auto D = SideTag::dirichlet;
  d.side_tags.assign(d.patches.size(), {D, D, D, D, D, D});
  build_topology(d);
  return {std::move(d), d.dim == 2 ? sine_rhs_2d : sine_rhs_3d};
}

DomainBundle load_domain_file(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw ConfigError("domain file: cannot open " + path);
  nlohmann::json j;
  try {
    file >> j;
  } catch (const std::exception& e) {
    throw ConfigError("domain file: " + std::string(e.what()));
  }

  try {
    const int dim = j.at("dim").get<int>();
    if (dim != 2 && dim != 3) throw ConfigError("domain file: dim must be 2 or 3");

    MultiPatchDomain d;
    d.dim = dim;
    for (const nlohmann::json& jp : j.at("patches")) {
      const auto corner = jp.at("corner").get<std::vector<double>>();
      const auto extent = jp.at("extent").get<std::vector<double>>();
      if (int(corner.size()) != dim || int(extent.size()) != dim)
        throw ConfigError("domain file: corner and extent need one entry per dimension");
      Eigen::VectorXd c(dim), e(dim);
      for (int a = 0; a < dim; ++a) {
        if (!(extent[a] > 0.0)) throw ConfigError("domain file: extents must be positive");
        c[a] = corner[a];
        e[a] = extent[a];
      }
      d.patches.push_back(GeometryMap::axis_aligned_box(c, e));
    }
    if (d.patches.empty()) throw ConfigError("domain file: no patches");

    // Sides default untagged; build_topology marks the matched ones, and the
    // rest must have been given explicitly.
    d.side_tags.assign(d.patches.size(),
                       {SideTag::neumann, SideTag::neumann, SideTag::neumann, SideTag::neumann,
                        SideTag::neumann, SideTag::neumann});
    std::vector<std::array<bool, 6>> given(d.patches.size(),
                                           {false, false, false, false, false, false});
    for (const nlohmann::json& jt : j.value("tags", nlohmann::json::array())) {
      const int patch = jt.at("patch").get<int>();
      if (patch < 0 || patch >= d.num_patches())
        throw ConfigError("domain file: tag names patch " + std::to_string(patch) +
                          " of " + std::to_string(d.num_patches()));
      const int side = side_from_name(jt.at("side").get<std::string>(), dim);
      const std::string tag = jt.at("tag").get<std::string>();
      if (tag == "dirichlet") d.side_tags[patch][side] = SideTag::dirichlet;
      else if (tag == "neumann") d.side_tags[patch][side] = SideTag::neumann;
      else throw ConfigError("domain file: unknown tag '" + tag + "'");
      given[patch][side] = true;
    }

    build_topology(d);
    for (int k = 0; k < d.num_patches(); ++k)
      for (int s = 0; s < 2 * dim; ++s) {
        const bool matched = d.tag(k, s) == SideTag::matched;
        if (matched && given[k][s])
          throw ConfigError("domain file: side " + std::string(side_name(s, dim)) + " of patch " +
                            std::to_string(k) + " matches a neighbor and cannot carry a tag");
        if (!matched && !given[k][s])
          throw ConfigError("domain file: side " + std::string(side_name(s, dim)) + " of patch " +
                            std::to_string(k) + " is unmatched and needs an explicit tag");
      }

    const std::string rhs_name = j.value("rhs", dim == 2 ? "sine2d" : "sine3d");
    std::function<double(const Eigen::VectorXd&)> rhs;
    if (rhs_name == "sine2d") rhs = sine_rhs_2d;
    else if (rhs_name == "sine3d") rhs = sine_rhs_3d;
    else if (rhs_name == "one") rhs = [](const Eigen::VectorXd&) { return 1.0; };
    else throw ConfigError("domain file: unknown rhs '" + rhs_name + "'");

    return {std::move(d), std::move(rhs)};
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("domain file: " + std::string(e.what()));
  }
}

DomainBundle resolve_domain(const std::string& descriptor) {
  if (descriptor == "fichera") return make_fichera();
  if (descriptor == "lshape") return make_lshape();
  const auto call_args = [&](const std::string& head) -> std::string {
    return descriptor.substr(head.size(), descriptor.size() - head.size() - 1);
  };
  if (descriptor.rfind("unit_grid(", 0) == 0 && descriptor.back() == ')') {
    std::vector<int> k = parse_int_list(call_args("unit_grid("), "unit_grid");
    if (k.size() == 2) return make_unit_grid(k[0], k[1]);
    if (k.size() == 3) return make_unit_grid(k[0], k[1], k[2]);
    throw ConfigError("unit_grid: takes 2 or 3 patch counts");
  }
  if (descriptor.rfind("file(", 0) == 0 && descriptor.back() == ')')
    return load_domain_file(call_args("file("));
  throw ConfigError("domain: unknown descriptor '" + descriptor +
                    "'; expected fichera, lshape, unit_grid(kx,ky[,kz]), or file(path)");
}

std::int64_t stored_stiffness_entries(int degree, int elements, int dim, int patches) {
  const int extent = elements + degree;
  std::int64_t pairs = 0;
  for (int i = 0; i < extent; ++i)
    pairs += std::min(i + degree, extent - 1) - std::max(i - degree, 0) + 1;
  std::int64_t per_patch = 1;
  for (int a = 0; a < dim; ++a) per_patch *= pairs;
  return per_patch * patches;
}

ResultRow run_single(const ExperimentConfig& cfg) {
  cfg.validate();
  DomainBundle bundle = resolve_domain(cfg.domain);
  MultiPatchDomain domain =
      cfg.split > 1 ? split_patches(bundle.domain, cfg.split) : std::move(bundle.domain);
  const int elements = 1 << cfg.levels;

  ResultRow row;
  row.level = cfg.levels;
  row.degree = cfg.degree;
  {
    DofMapper fine(domain, cfg.degree, elements);
    row.dofs = fine.num_dofs();
  }
  row.nnz = stored_stiffness_entries(cfg.degree, elements, domain.dim, domain.num_patches());

  SolveReport rep;
  std::uint64_t bytes = 0;
  int ranks = cfg.ranks;
  switch (cfg.backend) {
    case BackendKind::loopback: {
      if (cfg.ranks != 1) throw ConfigError("backend loopback runs exactly one rank");
      LoopbackComm comm;
      RankPartition part = contiguous_partition(domain.num_patches(), 1);
      parallel_solve_rank(comm, domain, part, cfg.degree, cfg.levels, cfg.cycle_params(),
                          bundle.rhs, cfg.tol, cfg.max_iter, &rep);
      bytes = comm.bytes_sent();
      break;
    }
    case BackendKind::inproc: {
      ParallelReport preport;
      parallel_pcg_solve(domain, cfg.degree, cfg.levels, cfg.cycle_params(), bundle.rhs,
                         cfg.ranks, cfg.tol, cfg.max_iter, &preport);
      rep = preport.solve;
      bytes = preport.comm_bytes;
      break;
    }
    case BackendKind::mpi: {
#ifdef PATCHMG_WITH_MPI
      // one rank per launched process; the world size is the rank count
      MpiComm comm;
      ranks = comm.size();
      RankPartition part = contiguous_partition(domain.num_patches(), ranks);
      parallel_solve_rank(comm, domain, part, cfg.degree, cfg.levels, cfg.cycle_params(),
                          bundle.rhs, cfg.tol, cfg.max_iter, &rep);
      bytes = std::uint64_t(comm.allreduce_sum(double(comm.bytes_sent())));
#else
      throw ConfigError("backend mpi is not compiled in");
#endif
      break;
    }
  }

  row.iterations = rep.iterations;
  if (!rep.residual_history.empty() && rep.residual_history.front() > 0.0)
    row.rel_res = rep.residual_history.back() / rep.residual_history.front();
  row.t_setup = rep.t_setup;
  row.t_assemble = rep.t_assemble;
  row.t_solve = rep.t_solve;
  row.ranks = ranks;
  row.comm_bytes = bytes;
  return row;
}

std::vector<ResultRow> run_iteration_table(const ExperimentConfig& cfg,
                                           const std::vector<int>& levels,
                                           const std::vector<int>& degrees) {
  if (levels.empty() || degrees.empty())
    throw ConfigError("iteration table: levels and degrees must be non-empty");
  std::vector<ResultRow> rows;
  for (int l : levels)
    for (int p : degrees) {
      ExperimentConfig cell = cfg;
      cell.levels = l;
      cell.degree = p;
      try {
        rows.push_back(run_single(cell));
      } catch (const DivergenceError& e) {
        throw DivergenceError(std::string(e.what()) + " at table cell l=" + std::to_string(l) +
                              " p=" + std::to_string(p));
      }
    }
  return rows;
}

std::vector<ScalingRow> run_scaling(const ExperimentConfig& cfg, const std::vector<int>& ranks,
                                    ScalingMode mode) {
  if (ranks.empty()) throw ConfigError("scaling: need at least one rank count");
  int dim = 0, base_patches = 0;
  {
    DomainBundle base = resolve_domain(cfg.domain);
    dim = base.domain.dim;
    base_patches = base.domain.num_patches();
  }

  std::vector<ScalingRow> rows;
  for (int r : ranks) {
    ExperimentConfig run = cfg;
    run.ranks = r;
    if (mode == ScalingMode::weak) {
      // grow the patch count with the rank count, keeping the load per rank
      const int factor = std::max(1, int(std::llround(std::pow(double(r), 1.0 / dim))));
      run.split = cfg.split * factor;
    }
    ScalingRow s;
    s.mode = mode;
    s.split = run.split;
    s.row = run_single(run);
    int patches = base_patches;
    for (int a = 0; a < dim; ++a) patches *= run.split;
    s.patches = patches;
    rows.push_back(s);
  }
  // per-phase speedups relative to the first requested rank count
  const ResultRow& base = rows.front().row;
  auto speedup = [](double t_base, double t) { return t > 0.0 ? t_base / t : 0.0; };
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i == 0) {
      rows[i].s_setup = rows[i].s_assemble = rows[i].s_solve = 1.0;
    } else {
      rows[i].s_setup = speedup(base.t_setup, rows[i].row.t_setup);
      rows[i].s_assemble = speedup(base.t_assemble, rows[i].row.t_assemble);
      rows[i].s_solve = speedup(base.t_solve, rows[i].row.t_solve);
    }
  }
  return rows;
}

std::string csv_header_iteration_table() {
  return "l,p,N,iters,rel_res,t_setup,t_assemble,t_solve";
}

std::string csv_header_scaling() {
  return "mode,R,m,K,N,iters,rel_res,t_setup,s_setup,t_assemble,s_assemble,t_solve,s_solve,"
         "comm_bytes";
}

std::string to_csv(const std::vector<ResultRow>& rows) {
  std::string csv = csv_header_iteration_table() + "\n";
  char line[160];
  for (const ResultRow& r : rows) {
    std::snprintf(line, sizeof line, "%d,%d,%lld,%d,%.3e,%.3f,%.3f,%.3f\n", r.level, r.degree,
                  (long long)r.dofs, r.iterations, r.rel_res, r.t_setup, r.t_assemble, r.t_solve);
    csv += line;
  }
  return csv;
}

std::string to_csv(const std::vector<ScalingRow>& rows) {
  std::string csv = csv_header_scaling() + "\n";
  char line[240];
  for (const ScalingRow& s : rows) {
    std::snprintf(line, sizeof line,
                  "%s,%d,%d,%d,%lld,%d,%.3e,%.3f,%.2f,%.3f,%.2f,%.3f,%.2f,%llu\n",
                  s.mode == ScalingMode::strong ? "strong" : "weak", s.row.ranks, s.split,
                  s.patches, (long long)s.row.dofs, s.row.iterations, s.row.rel_res,
                  s.row.t_setup, s.s_setup, s.row.t_assemble, s.s_assemble, s.row.t_solve,
                  s.s_solve, (unsigned long long)s.row.comm_bytes);
    csv += line;
  }
  return csv;
}

namespace {

Eigen::MatrixXd kron_dense(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  Eigen::MatrixXd out(A.rows() * B.rows(), A.cols() * B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      out.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return out;
}

}  // namespace

int run_invariant_checks(std::ostream& out, unsigned seed) {
  int failures = 0;
  auto report = [&](const char* name, bool ok, double measure) {
    char line[160];
    std::snprintf(line, sizeof line, "check %-28s %s  (%.3e)\n", name, ok ? "ok" : "FAIL",
                  measure);
    out << line;
    if (!ok) ++failures;
  };
  std::mt19937 rng(seed);
  auto random_vec = [&](Eigen::Index n) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = dist(rng);
    return v;
  };

  // identity geometry turns the stiffness into the univariate tensor sum
  {
    DomainBundle square = make_unit_grid(1, 1);
    DofMapper mapper(square.domain, 2, 4);
    Eigen::MatrixXd A = assemble_stiffness(mapper).assemble_global().toDense();
    UnivariateSpace s(2, 4, EndCondition::eliminated, EndCondition::eliminated);
    Eigen::MatrixXd K = univariate_stiffness(s).to_dense();
    Eigen::MatrixXd M = univariate_mass(s).to_dense();
    // axis 0 runs fastest in the lattice, so it is the inner Kronecker factor
    Eigen::MatrixXd expected = kron_dense(M, K) + kron_dense(K, M);
    const double err = (A - expected).norm() / expected.norm();
    report("tensor-stiffness-identity", err <= 1e-12, err);
  }

  DomainBundle ell = make_lshape();
  Hierarchy h(ell.domain, 2, 1);

  // coarse operator equals the fine operator compressed through the transfer
  {
    Eigen::MatrixXd P = h.transfer(1).explicit_matrix().toDense();
    Eigen::MatrixXd Af = h.op(1).assemble_global().toDense();
    Eigen::MatrixXd Ac = h.op(0).assemble_global().toDense();
    const double err = (P.transpose() * Af * P - Ac).norm() / Ac.norm();
    report("two-level-galerkin-identity", err <= 1e-10, err);
  }

  // restriction is the exact transpose of prolongation
  {
    Eigen::VectorXd c = random_vec(h.mapper(0).num_dofs());
    Eigen::VectorXd r = random_vec(h.mapper(1).num_dofs());
    const double a = h.transfer(1).prolong(c).dot(r);
    const double b = c.dot(h.transfer(1).restrict_full(r));
    const double err = std::abs(a - b) / std::max(1.0, std::abs(a));
    report("transfer-adjointness", err <= 1e-12, err);
  }

  // the additive piece correction is symmetric and positive definite
  {
    Eigen::VectorXd a = random_vec(h.mapper(1).num_dofs());
    Eigen::VectorXd b = random_vec(h.mapper(1).num_dofs());
    Eigen::VectorXd Sa = h.smoother(1).apply(a);
    Eigen::VectorXd Sb = h.smoother(1).apply(b);
    const double sym = std::abs(Sa.dot(b) - a.dot(Sb)) / std::max(1.0, std::abs(Sa.dot(b)));
    const double energy = a.dot(Sa);
    report("smoother-symmetry", sym <= 1e-12, sym);
    report("smoother-definiteness", energy > 0.0, energy);
  }

  // distributed shares accumulate back to the global vector, and one dot of
  // mixed forms equals the global pairing
  {
    DomainBundle strip = make_unit_grid(2, 1);
    Hierarchy h2(strip.domain, 2, 2);
    const int L = h2.finest_level();
    Eigen::VectorXd v = random_vec(h2.mapper(L).num_dofs());
    const double global_dot = v.dot(v);
    RankPartition part = contiguous_partition(2, 2);
    InProcHub hub(2);
    std::array<int, 2> mismatches{0, 0};
    std::array<double, 2> dot_err{0.0, 0.0};
    run_ranks(hub, [&](int rank, Communicator& comm) {
      ParallelBackend b(h2, part, comm);
      DistributedVector share = b.to_distributed_owner(L, v);
      AccumulatedVector acc = b.accumulate(L, share);
      Eigen::VectorXd back = b.gather_global(L, acc);
      int bad = 0;
      for (Eigen::Index i = 0; i < v.size(); ++i)
        if (back[i] != v[i]) ++bad;
      mismatches[std::size_t(rank)] = bad;
      dot_err[std::size_t(rank)] =
          std::abs(b.dot(L, share, b.to_accumulated(L, v)) - global_dot);
    });
    report("accumulate-round-trip", mismatches[0] == 0 && mismatches[1] == 0,
           double(mismatches[0] + mismatches[1]));
    const double worst = std::max(dot_err[0], dot_err[1]);
    report("distributed-dot-splitting", worst <= 1e-12 * std::max(1.0, global_dot), worst);
  }

  // end to end: the solver reaches tolerance and repeats its iteration count
  {
    ExperimentConfig cfg;
    cfg.domain = "lshape";
    cfg.levels = 2;
    cfg.degree = 2;
    cfg.backend = BackendKind::loopback;
    ResultRow first = run_single(cfg);
    ResultRow second = run_single(cfg);
    report("solve-reaches-tolerance", first.rel_res <= cfg.tol && first.iterations <= 60,
           first.rel_res);
    report("solve-deterministic",
           first.iterations == second.iterations && first.rel_res == second.rel_res,
           double(std::abs(first.iterations - second.iterations)));
  }

  return failures;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const DivergenceError*>(&e)) return 3;
  if (dynamic_cast<const TransportError*>(&e)) return 4;
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DomainError*>(&e) ||
      dynamic_cast<const NonMatchingError*>(&e) || dynamic_cast<const NonManifoldError*>(&e) ||
      dynamic_cast<const SingularGeometryError*>(&e))
    return 2;
  return 1;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"multi-patch spline multigrid experiment driver", "patchmg"};
  app.require_subcommand(0, 1);

  ExperimentConfig cfg;
  std::string cycle = "v";
  std::string backend = "inproc";
  std::string out_path;
  std::string levels_list = "1,2,3";
  std::string degrees_list = "2,3,4";
  std::string ranks_list = "1";
  std::string mode_name = "strong";

  auto add_problem_flags = [&](CLI::App* cmd) {
    cmd->add_option("--domain", cfg.domain,
                    "fichera, lshape, unit_grid(kx,ky[,kz]), or file(path)");
    cmd->add_option("--split", cfg.split, "split every patch into split^dim subpatches");
    cmd->add_option("--cycle", cycle, "v or w");
    cmd->add_option("--nu", cfg.nu, "pre- and post-smoothing steps");
    cmd->add_option("--tau", cfg.tau, "smoother damping");
    cmd->add_option("--sigma-scale", cfg.sigma_scale, "interior shift sigma = h^-2/sigma-scale");
    cmd->add_flag("--damp-coarse", cfg.damp_coarse, "damp the coarse correction by tau");
    cmd->add_option("--tol", cfg.tol, "relative residual tolerance");
    cmd->add_option("--max-iter", cfg.max_iter, "iteration cap");
    cmd->add_option("--backend", backend,
                    "loopback, inproc, or mpi (mpi adopts the launched world size)");
    cmd->add_option("--seed", cfg.seed, "seed for randomized check vectors");
    cmd->add_option("--out", out_path, "write the CSV here instead of stdout");
  };

  CLI::App* solve = app.add_subcommand("solve", "run one experiment");
  add_problem_flags(solve);
  solve->add_option("--levels", cfg.levels, "finest level (2^levels elements per direction)");
  solve->add_option("--degree", cfg.degree, "spline degree");
  solve->add_option("--ranks", cfg.ranks, "rank count");

  CLI::App* table = app.add_subcommand("iteration-table", "one solve per (level, degree) cell");
  add_problem_flags(table);
  table->add_option("--levels", levels_list, "comma-separated levels");
  table->add_option("--degrees", degrees_list, "comma-separated degrees");
  table->add_option("--ranks", cfg.ranks, "rank count");

  CLI::App* scaling = app.add_subcommand("scaling", "sweep rank counts");
  add_problem_flags(scaling);
  scaling->add_option("--levels", cfg.levels, "finest level");
  scaling->add_option("--degree", cfg.degree, "spline degree");
  scaling->add_option("--ranks", ranks_list, "comma-separated rank counts");
  scaling->add_option("--mode", mode_name, "strong or weak");

  CLI::App* check = app.add_subcommand("check", "run the invariant suite");
  check->add_option("--seed", cfg.seed, "seed for randomized check vectors");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (check->parsed()) return run_invariant_checks(out, cfg.seed) == 0 ? 0 : 1;
    if (!solve->parsed() && !table->parsed() && !scaling->parsed()) {
      out << app.help();
      return 0;
    }

    if (cycle == "v") cfg.cycle_mu = 1;
    else if (cycle == "w") cfg.cycle_mu = 2;
    else throw ConfigError("cycle: expected v or w, got '" + cycle + "'");
    cfg.backend = backend_from_name(backend);

    std::string csv;
    if (solve->parsed()) {
      csv = to_csv(std::vector<ResultRow>{run_single(cfg)});
    } else if (table->parsed()) {
      csv = to_csv(run_iteration_table(cfg, parse_int_list(levels_list, "levels"),
                                       parse_int_list(degrees_list, "degrees")));
    } else {
      ScalingMode mode;
      if (mode_name == "strong") mode = ScalingMode::strong;
      else if (mode_name == "weak") mode = ScalingMode::weak;
      else throw ConfigError("mode: expected strong or weak, got '" + mode_name + "'");
      csv = to_csv(run_scaling(cfg, parse_int_list(ranks_list, "ranks"), mode));
    }

#ifdef PATCHMG_WITH_MPI
    if (cfg.backend == BackendKind::mpi) {
      int world_rank = 0;
      MPI_Comm_rank(MPI_COMM_WORLD, &world_rank);
      if (world_rank != 0) return 0;  // one writer
    }
#endif
    if (out_path.empty()) {
      out << csv;
    } else {
      std::ofstream file(out_path);
      if (!file) throw ConfigError("out: cannot write " + out_path);
      file << csv;
      const long rows = std::count(csv.begin(), csv.end(), '\n') - 1;
      out << "wrote " << rows << " rows to " << out_path << "\n";
    }
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

}  // namespace patchmg
