#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "patchmg/multigrid.hpp"
#include "patchmg/topology.hpp"

namespace patchmg {

/// Where a solve runs: `loopback` is a single rank over the no-op transport,
/// `inproc` spawns the requested rank count inside the process, `mpi` joins
/// the launched world (one rank per process, available when built with MPI).
enum class BackendKind { loopback, inproc, mpi };

BackendKind backend_from_name(const std::string& name);
const char* backend_name(BackendKind kind);

/// One experiment: which problem to solve and with what solver knobs.
struct ExperimentConfig {
  std::string domain = "fichera";  // fichera | lshape | unit_grid(kx,ky[,kz]) | file(path)
  int split = 1;                   // split every patch into split^dim subpatches
  int levels = 2;                  // finest level; 2^levels elements per patch direction
  int degree = 2;
  int cycle_mu = 1;  // 1 = V-cycle, 2 = W-cycle
  int nu = 1;        // pre- and post-smoothing steps
  double tau = 0.25;
  double sigma_scale = 0.2;  // interior shift sigma = h^-2 / sigma_scale
  bool damp_coarse = false;
  double tol = 1e-8;
  int max_iter = 500;
  int ranks = 1;
  BackendKind backend = BackendKind::inproc;
  unsigned seed = 42;  // randomized check vectors only; the solver itself is deterministic

  CycleParams cycle_params() const;
  /// Throws ConfigError naming the first out-of-range field.
  void validate() const;
};

/// Outcome of one solve, echoing the grid cell it belongs to.
struct ResultRow {
  int level = 0;
  int degree = 0;
  std::int64_t dofs = 0;
  std::int64_t nnz = 0;  // stored stiffness entries over all patch blocks
  int iterations = 0;
  double rel_res = 0.0;
  double t_setup = 0.0;
  double t_assemble = 0.0;
  double t_solve = 0.0;
  int ranks = 1;
  std::uint64_t comm_bytes = 0;
};

/// A solvable problem: the domain and its manufactured source term.
struct DomainBundle {
  MultiPatchDomain domain;
  std::function<double(const Eigen::VectorXd&)> rhs;
};

/// Corner domain (0,2)^3 minus [1,2)^3 as 7 translated unit cubes; Dirichlet
/// on the three coordinate planes, Neumann elsewhere; sine source term.
DomainBundle make_fichera();

/// (0,2)^2 minus [1,2)^2 as 3 unit squares; Dirichlet on {xy = 0}.
DomainBundle make_lshape();

/// kx-by-ky (-by-kz) grid of unit boxes, outer boundary all Dirichlet.
/// kz = 0 gives the 2D grid.  Throws ConfigError on a count below 1.
DomainBundle make_unit_grid(int kx, int ky, int kz = 0);

/// Loads a domain from a JSON file of axis-aligned patches:
///   {"dim": 2,
///    "patches": [{"corner": [0,0], "extent": [1,1]}, ...],
///    "tags": [{"patch": 0, "side": "xmin", "tag": "dirichlet"}, ...],
///    "rhs": "sine2d"}                    // optional: sine2d | sine3d | one
/// Every side that does not match a neighbor must carry an explicit tag, and
/// no tagged side may turn out matched; violations are ConfigErrors.
DomainBundle load_domain_file(const std::string& path);

/// Maps a --domain descriptor string to its bundle.
DomainBundle resolve_domain(const std::string& descriptor);

/// Entries stored by the scattered stiffness representation: per patch, the
/// tensor band pattern pairs |i_a - j_a| <= degree in every direction.
std::int64_t stored_stiffness_entries(int degree, int elements, int dim, int patches);

/// One solve per the config.  Dispatches on cfg.backend; `mpi` requires an
/// initialized MPI runtime and cfg.ranks equal to the world size.
ResultRow run_single(const ExperimentConfig& cfg);

/// One solve per (level, degree) cell, row-major over levels.  A divergence
/// aborts the table with the offending cell named in the error.
std::vector<ResultRow> run_iteration_table(const ExperimentConfig& cfg,
                                           const std::vector<int>& levels,
                                           const std::vector<int>& degrees);

enum class ScalingMode { strong, weak };

/// One scaling row: the solve outcome plus per-phase speedups s = t_first/t_R
/// relative to the first requested rank count (1.0 exactly for that row).
struct ScalingRow {
  ScalingMode mode = ScalingMode::strong;
  int split = 1;
  int patches = 0;
  ResultRow row;
  double s_setup = 1.0;
  double s_assemble = 1.0;
  double s_solve = 1.0;
};

/// Strong mode keeps the problem fixed and sweeps the rank list; weak mode
/// also grows the patch split as round(R^(1/dim)) times the configured split,
/// keeping the per-rank load roughly constant.
std::vector<ScalingRow> run_scaling(const ExperimentConfig& cfg, const std::vector<int>& ranks,
                                    ScalingMode mode);

std::string csv_header_iteration_table();
std::string csv_header_scaling();
std::string to_csv(const std::vector<ResultRow>& rows);
std::string to_csv(const std::vector<ScalingRow>& rows);

/// Runtime invariant suite behind the `check` subcommand: one line per check.
/// Returns the number of failed checks.
int run_invariant_checks(std::ostream& out, unsigned seed = 42);

/// CLI exit code of a failure: 2 bad input (config, domain, geometry), 3
/// divergence, 4 transport, 1 anything else.
int exit_code_for(const std::exception& e);

/// The command-line tool: subcommands solve, iteration-table, scaling, check.
/// Returns the process exit code; never throws.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace patchmg
