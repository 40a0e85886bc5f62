#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "patchmg/assembly.hpp"
#include "patchmg/errors.hpp"
#include "patchmg/harness.hpp"
#include "patchmg/multigrid.hpp"
#include "util.hpp"

using namespace patchmg;

namespace {

std::string write_temp_file(const std::string& name, const std::string& body) {
  std::filesystem::path p = std::filesystem::temp_directory_path() / name;
  std::ofstream f(p);
  f << body;
  f.close();
  return p.string();
}

int cli(std::vector<std::string> args, std::string* out_text = nullptr,
        std::string* err_text = nullptr) {
  std::ostringstream out, err;
  int code = run_cli(args, out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

/// Tags of every side of every patch, for comparing two builds of a domain.
std::vector<SideTag> all_tags(const MultiPatchDomain& d) {
  std::vector<SideTag> tags;
  for (int k = 0; k < d.num_patches(); ++k)
    for (int s = 0; s < 2 * d.dim; ++s) tags.push_back(d.tag(k, s));
  return tags;
}

}  // namespace

TEST_CASE("domain generators reproduce the reference topologies") {
  DomainBundle fic = make_fichera();
  CHECK(fic.domain.dim == 3);
  CHECK(fic.domain.num_patches() == 7);
  for (const GeometryMap& g : fic.domain.patches) {
    Eigen::VectorXd c = Eigen::VectorXd::Constant(3, 0.5);
    CHECK((g.jacobian(c) - Eigen::MatrixXd::Identity(3, 3)).norm() == 0.0);
  }
  CHECK(split_patches(fic.domain, 4).num_patches() == 448);

  // same tags and interface count as the independently written test fixture
  MultiPatchDomain ref = testutil::fichera();
  CHECK(fic.domain.interfaces.size() == ref.interfaces.size());
  CHECK(all_tags(fic.domain) == all_tags(ref));
  // source term peaks where every sine factor is 1
  Eigen::VectorXd peak = testutil::vec3(0.1, 0.1, 0.1);
  CHECK(fic.rhs(peak) == doctest::Approx(75.0 * M_PI * M_PI).epsilon(1e-12));

  DomainBundle ell = make_lshape();
  CHECK(ell.domain.num_patches() == 3);
  CHECK(ell.domain.interfaces.size() == 2);
  CHECK(all_tags(ell.domain) == all_tags(testutil::lshape()));
  // exactly one shared interior vertex dof set at the reentrant corner
  {
    MultiPatchDomain dom = ell.domain;
    DofMapper mapper(dom, 2, 4);
    int vertex_pieces = 0;
    for (const Piece& pc : classify_dofs(mapper))
      if (pc.kind == PieceKind::vertex) ++vertex_pieces;
    CHECK(vertex_pieces == 1);
  }
  CHECK(ell.rhs(testutil::vec2(0.1, 0.1)) == doctest::Approx(50.0 * M_PI * M_PI).epsilon(1e-12));

  DomainBundle strip = make_unit_grid(2, 1);
  CHECK(strip.domain.dim == 2);
  CHECK(strip.domain.num_patches() == 2);
  CHECK(strip.domain.interfaces.size() == 1);
  for (SideTag t : all_tags(strip.domain)) CHECK(t != SideTag::neumann);

  CHECK(split_patches(make_unit_grid(4, 4).domain, 2).num_patches() == 64);

  DomainBundle box = make_unit_grid(2, 1, 1);
  CHECK(box.domain.dim == 3);
  CHECK(box.domain.num_patches() == 2);
  CHECK(box.domain.interfaces.size() == 1);
  CHECK(box.rhs(testutil::vec3(0.1, 0.1, 0.1)) ==
        doctest::Approx(75.0 * M_PI * M_PI).epsilon(1e-12));

  CHECK_THROWS_AS(make_unit_grid(0, 1), ConfigError);
  CHECK_THROWS_AS(make_unit_grid(1, -2), ConfigError);
}

TEST_CASE("descriptor strings select and parameterize the generators") {
  CHECK(resolve_domain("fichera").domain.num_patches() == 7);
  CHECK(resolve_domain("lshape").domain.num_patches() == 3);
  CHECK(resolve_domain("unit_grid(2,3)").domain.num_patches() == 6);
  CHECK(resolve_domain("unit_grid(2,1,2)").domain.num_patches() == 4);
  CHECK_THROWS_AS(resolve_domain("yeti"), ConfigError);
  CHECK_THROWS_AS(resolve_domain("unit_grid(2)"), ConfigError);
  CHECK_THROWS_AS(resolve_domain("unit_grid(2,a)"), ConfigError);
  CHECK_THROWS_AS(resolve_domain("unit_grid(1,1,1,1)"), ConfigError);
  CHECK_THROWS_AS(resolve_domain("file(/nonexistent/no.json)"), ConfigError);
}

TEST_CASE("stored entry bookkeeping matches the assembled blocks") {
  struct Case {
    int dim, degree, elements;
  };
  for (Case c : {Case{2, 1, 2}, Case{2, 3, 4}, Case{3, 2, 2}}) {
    Eigen::VectorXd corner = Eigen::VectorXd::Zero(c.dim);
    Eigen::VectorXd extent = Eigen::VectorXd::Ones(c.dim);
    PatchOperator block =
        assemble_patch_stiffness(GeometryMap::axis_aligned_box(corner, extent), c.degree,
                                 c.elements);
    CAPTURE(c.dim);
    CAPTURE(c.degree);
    CHECK(std::int64_t(block.vals.size()) ==
          stored_stiffness_entries(c.degree, c.elements, c.dim, 1));
  }
  // additive over patches
  CHECK(stored_stiffness_entries(2, 4, 2, 7) == 7 * stored_stiffness_entries(2, 4, 2, 1));
}

TEST_CASE("config validation rejects out-of-range parameters") {
  ExperimentConfig ok;
  ok.domain = "lshape";
  CHECK_NOTHROW(ok.validate());
  auto reject = [&](auto mutate) {
    ExperimentConfig bad = ok;
    mutate(bad);
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  };
  reject([](ExperimentConfig& c) { c.degree = 0; });
  reject([](ExperimentConfig& c) { c.degree = 9; });
  reject([](ExperimentConfig& c) { c.levels = 0; });
  reject([](ExperimentConfig& c) { c.levels = 9; });
  reject([](ExperimentConfig& c) { c.split = 0; });
  reject([](ExperimentConfig& c) { c.split = 9; });
  reject([](ExperimentConfig& c) { c.cycle_mu = 0; });
  reject([](ExperimentConfig& c) { c.cycle_mu = 3; });
  reject([](ExperimentConfig& c) { c.nu = 0; });
  reject([](ExperimentConfig& c) { c.tau = 0.0; });
  reject([](ExperimentConfig& c) { c.sigma_scale = -1.0; });
  reject([](ExperimentConfig& c) { c.tol = 0.0; });
  reject([](ExperimentConfig& c) { c.tol = 1.5; });
  reject([](ExperimentConfig& c) { c.max_iter = 0; });
  reject([](ExperimentConfig& c) { c.ranks = 0; });
  reject([](ExperimentConfig& c) { c.ranks = 65; });

  CHECK(backend_from_name("loopback") == BackendKind::loopback);
  CHECK(backend_from_name("inproc") == BackendKind::inproc);
  CHECK(backend_from_name("mpi") == BackendKind::mpi);
  CHECK_THROWS_AS(backend_from_name("cluster"), ConfigError);
}

TEST_CASE("one solve fills a result row consistent with its grid cell") {
  ExperimentConfig cfg;
  cfg.domain = "lshape";
  cfg.levels = 2;
  cfg.degree = 2;
  cfg.backend = BackendKind::loopback;
  ResultRow row = run_single(cfg);

  CHECK(row.level == 2);
  CHECK(row.degree == 2);
  MultiPatchDomain dom = testutil::lshape();
  DofMapper mapper(dom, 2, 4);
  CHECK(row.dofs == mapper.num_dofs());
  CHECK(row.nnz == stored_stiffness_entries(2, 4, 2, 3));
  CHECK(row.iterations > 0);
  CHECK(row.iterations <= 60);
  CHECK(row.rel_res <= cfg.tol);
  CHECK(row.rel_res > 0.0);
  CHECK(row.t_setup >= 0.0);
  CHECK(row.t_assemble >= 0.0);
  CHECK(row.t_solve >= 0.0);
  CHECK(row.ranks == 1);
  CHECK(row.comm_bytes == 0);

  // the serial solver is the reference for any single-rank backend
  Hierarchy h(dom, 2, 2);
  Eigen::VectorXd f = assemble_rhs(h.mapper(h.finest_level()), make_lshape().rhs);
  SolveReport serial;
  pcg_solve(h, f, cfg.tol, cfg.max_iter, &serial);
  CHECK(row.iterations == serial.iterations);

  ExperimentConfig inproc = cfg;
  inproc.backend = BackendKind::inproc;
  ResultRow hub_row = run_single(inproc);
  CHECK(hub_row.iterations == row.iterations);
  CHECK(hub_row.rel_res == row.rel_res);  // one rank is bitwise equal to serial
  CHECK(hub_row.comm_bytes == 0);

  ExperimentConfig multi = cfg;
  multi.backend = BackendKind::inproc;
  multi.ranks = 3;
  ResultRow par_row = run_single(multi);
  CHECK(par_row.ranks == 3);
  CHECK(par_row.comm_bytes > 0);
  CHECK(par_row.rel_res <= cfg.tol);
  CHECK(par_row.iterations >= row.iterations - 1);
  CHECK(par_row.iterations <= row.iterations + 1);

  ExperimentConfig bad = cfg;
  bad.backend = BackendKind::loopback;
  bad.ranks = 2;  // the loopback transport carries exactly one rank
  CHECK_THROWS_AS(run_single(bad), ConfigError);
}

TEST_CASE("iteration table sweeps cells deterministically under the pinned schema") {
  CHECK(csv_header_iteration_table() == "l,p,N,iters,rel_res,t_setup,t_assemble,t_solve");

  ExperimentConfig cfg;
  cfg.domain = "lshape";
  cfg.backend = BackendKind::loopback;
  std::vector<ResultRow> rows = run_iteration_table(cfg, {1, 2}, {2, 3});
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].level == 1);
  CHECK(rows[0].degree == 2);
  CHECK(rows[1].level == 1);
  CHECK(rows[1].degree == 3);
  CHECK(rows[3].level == 2);
  CHECK(rows[3].degree == 3);
  for (const ResultRow& r : rows) {
    CHECK(r.iterations <= 60);
    CHECK(r.rel_res <= cfg.tol);
  }

  std::vector<ResultRow> again = run_iteration_table(cfg, {1, 2}, {2, 3});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(again[i].iterations == rows[i].iterations);
    CHECK(again[i].rel_res == rows[i].rel_res);
  }

  std::string csv = to_csv(rows);
  CHECK(csv.substr(0, csv.find('\n')) == csv_header_iteration_table());
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);  // header + 4 rows

  // a divergence aborts with the offending cell named
  ExperimentConfig tight = cfg;
  tight.max_iter = 1;
  bool named = false;
  try {
    run_iteration_table(tight, {2}, {2});
  } catch (const DivergenceError& e) {
    named = std::string(e.what()).find("l=2") != std::string::npos &&
            std::string(e.what()).find("p=2") != std::string::npos;
  }
  CHECK(named);
}

TEST_CASE("iteration table covers the corner domain at desk scale") {
  ExperimentConfig cfg;
  cfg.domain = "fichera";
  cfg.backend = BackendKind::loopback;
  std::vector<ResultRow> rows = run_iteration_table(cfg, {1, 2}, {2, 3});
  REQUIRE(rows.size() == 4);
  for (const ResultRow& r : rows) {
    CHECK(r.iterations <= 60);
    CHECK(r.rel_res <= 1e-8);
  }
}

TEST_CASE("csv formatting is dot-decimal with pinned precision") {
  ResultRow row;
  row.level = 1;
  row.degree = 2;
  row.dofs = 25;
  row.nnz = 49;
  row.iterations = 10;
  row.rel_res = 5e-9;
  row.t_setup = 0.25;
  row.t_assemble = 0.5;
  row.t_solve = 0.125;
  std::string csv = to_csv(std::vector<ResultRow>{row});
  CHECK(csv == "l,p,N,iters,rel_res,t_setup,t_assemble,t_solve\n"
               "1,2,25,10,5.000e-09,0.250,0.500,0.125\n");
}

TEST_CASE("scaling rows pin the speedup convention and weak growth") {
  CHECK(csv_header_scaling() ==
        "mode,R,m,K,N,iters,rel_res,t_setup,s_setup,t_assemble,s_assemble,t_solve,s_solve,"
        "comm_bytes");

  ExperimentConfig cfg;
  cfg.domain = "lshape";
  cfg.levels = 2;
  cfg.degree = 2;
  std::vector<ScalingRow> strong = run_scaling(cfg, {1, 3}, ScalingMode::strong);
  REQUIRE(strong.size() == 2);
  CHECK(strong[0].row.ranks == 1);
  CHECK(strong[0].s_setup == 1.0);
  CHECK(strong[0].s_assemble == 1.0);
  CHECK(strong[0].s_solve == 1.0);
  CHECK(strong[0].patches == 3);
  CHECK(strong[1].patches == 3);  // strong scaling keeps the problem fixed
  CHECK(strong[1].row.dofs == strong[0].row.dofs);
  CHECK(strong[1].row.comm_bytes > 0);
  // convergence does not depend on the rank count
  CHECK(std::abs(strong[1].row.iterations - strong[0].row.iterations) <= 1);

  std::vector<ScalingRow> weak = run_scaling(cfg, {1, 4}, ScalingMode::weak);
  REQUIRE(weak.size() == 2);
  CHECK(weak[0].split == 1);
  CHECK(weak[0].patches == 3);
  CHECK(weak[1].split == 2);
  CHECK(weak[1].patches == 12);
  CHECK(weak[1].row.dofs > weak[0].row.dofs);

  std::string csv = to_csv(weak);
  CHECK(csv.substr(0, csv.find('\n')) == csv_header_scaling());
  CHECK(csv.find("weak,") != std::string::npos);
}

TEST_CASE("weak scaling of the corner domain walks the patch progression") {
  ExperimentConfig cfg;
  cfg.domain = "fichera";
  cfg.levels = 1;
  cfg.degree = 2;
  std::vector<ScalingRow> weak = run_scaling(cfg, {1, 8}, ScalingMode::weak);
  REQUIRE(weak.size() == 2);
  CHECK(weak[0].patches == 7);
  CHECK(weak[1].patches == 56);
  CHECK(weak[1].row.ranks == 8);
  // the split changes the discretization, so counts are not comparable across
  // weak rows; each must simply converge
  CHECK(weak[0].row.iterations <= 60);
  CHECK(weak[1].row.iterations <= 60);
  CHECK(weak[0].row.rel_res <= 1e-8);
  CHECK(weak[1].row.rel_res <= 1e-8);
}

TEST_CASE("domain files demand explicit tags exactly on unmatched sides") {
  std::string good = R"({
    "dim": 2,
    "patches": [{"corner": [0, 0], "extent": [1, 1]},
                {"corner": [1, 0], "extent": [1, 1]}],
    "tags": [{"patch": 0, "side": "xmin", "tag": "dirichlet"},
             {"patch": 0, "side": "ymin", "tag": "dirichlet"},
             {"patch": 0, "side": "ymax", "tag": "neumann"},
             {"patch": 1, "side": "xmax", "tag": "dirichlet"},
             {"patch": 1, "side": "ymin", "tag": "dirichlet"},
             {"patch": 1, "side": "ymax", "tag": "neumann"}],
    "rhs": "sine2d"
  })";
  std::string path = write_temp_file("patchmg_good_domain.json", good);
  DomainBundle loaded = load_domain_file(path);
  CHECK(loaded.domain.num_patches() == 2);
  CHECK(loaded.domain.interfaces.size() == 1);
  CHECK(loaded.domain.tag(0, 0) == SideTag::dirichlet);
  CHECK(loaded.domain.tag(0, 3) == SideTag::neumann);
  CHECK(loaded.domain.tag(0, 1) == SideTag::matched);
  CHECK(loaded.rhs(testutil::vec2(0.1, 0.1)) ==
        doctest::Approx(50.0 * M_PI * M_PI).epsilon(1e-12));

  // descriptor wiring
  CHECK(resolve_domain("file(" + path + ")").domain.num_patches() == 2);

  // an unmatched side without a tag is an error naming the side
  std::string missing = R"({
    "dim": 2,
    "patches": [{"corner": [0, 0], "extent": [1, 1]}],
    "tags": [{"patch": 0, "side": "xmin", "tag": "dirichlet"},
             {"patch": 0, "side": "xmax", "tag": "dirichlet"},
             {"patch": 0, "side": "ymin", "tag": "dirichlet"}]
  })";
  bool names_side = false;
  try {
    load_domain_file(write_temp_file("patchmg_missing_tag.json", missing));
  } catch (const ConfigError& e) {
    names_side = std::string(e.what()).find("ymax") != std::string::npos;
  }
  CHECK(names_side);

  // tagging a side that matches a neighbor is an error too
  std::string tagged_interface = R"({
    "dim": 2,
    "patches": [{"corner": [0, 0], "extent": [1, 1]},
                {"corner": [1, 0], "extent": [1, 1]}],
    "tags": [{"patch": 0, "side": "xmin", "tag": "dirichlet"},
             {"patch": 0, "side": "ymin", "tag": "dirichlet"},
             {"patch": 0, "side": "ymax", "tag": "dirichlet"},
             {"patch": 0, "side": "xmax", "tag": "neumann"},
             {"patch": 1, "side": "xmax", "tag": "dirichlet"},
             {"patch": 1, "side": "ymin", "tag": "dirichlet"},
             {"patch": 1, "side": "ymax", "tag": "dirichlet"}]
  })";
  CHECK_THROWS_AS(load_domain_file(write_temp_file("patchmg_tagged_iface.json", tagged_interface)),
                  ConfigError);

  CHECK_THROWS_AS(load_domain_file(write_temp_file("patchmg_bad.json", "{ not json")),
                  ConfigError);
  CHECK_THROWS_AS(load_domain_file(write_temp_file(
                      "patchmg_bad_rhs.json",
                      R"({"dim": 2, "patches": [{"corner": [0,0], "extent": [1,1]}],
                          "tags": [{"patch": 0, "side": "xmin", "tag": "dirichlet"},
                                   {"patch": 0, "side": "xmax", "tag": "dirichlet"},
                                   {"patch": 0, "side": "ymin", "tag": "dirichlet"},
                                   {"patch": 0, "side": "ymax", "tag": "dirichlet"}],
                          "rhs": "cosine"})")),
                  ConfigError);
  CHECK_THROWS_AS(load_domain_file(write_temp_file(
                      "patchmg_bad_side.json",
                      R"({"dim": 2, "patches": [{"corner": [0,0], "extent": [1,1]}],
                          "tags": [{"patch": 0, "side": "front", "tag": "dirichlet"}]})")),
                  ConfigError);
  CHECK_THROWS_AS(load_domain_file("/nonexistent/no.json"), ConfigError);
}

TEST_CASE("failures map onto the documented exit codes") {
  CHECK(exit_code_for(ConfigError("x")) == 2);
  CHECK(exit_code_for(DomainError("x")) == 2);
  CHECK(exit_code_for(NonMatchingError("x")) == 2);
  CHECK(exit_code_for(NonManifoldError("x")) == 2);
  CHECK(exit_code_for(SingularGeometryError("x")) == 2);
  CHECK(exit_code_for(DivergenceError("x")) == 3);
  CHECK(exit_code_for(TransportError("x")) == 4);
  CHECK(exit_code_for(DecompositionError("x")) == 1);
  CHECK(exit_code_for(std::runtime_error("x")) == 1);
}

TEST_CASE("the command line drives solves and reports errors by exit code") {
  std::string out, err;

  CHECK(cli({"solve", "--domain", "lshape", "--levels", "1", "--degree", "2", "--backend",
             "loopback"},
            &out) == 0);
  CHECK(out.find(csv_header_iteration_table()) != std::string::npos);

  CHECK(cli({}, &out) == 0);
  CHECK(out.find("solve") != std::string::npos);
  CHECK(cli({"--help"}, &out) == 0);

  CHECK(cli({"solve", "--degree", "99"}, &out, &err) == 2);
  CHECK(cli({"solve", "--domain", "nosuch"}, &out, &err) == 2);
  CHECK(err.find("domain") != std::string::npos);
  CHECK(cli({"solve", "--bogus"}, &out, &err) == 2);
  CHECK(cli({"solve", "--cycle", "x"}, &out, &err) == 2);
  CHECK(cli({"solve", "--domain", "lshape", "--levels", "2", "--degree", "2", "--max-iter", "1"},
            &out, &err) == 3);

  std::string table_path =
      (std::filesystem::temp_directory_path() / "patchmg_table.csv").string();
  std::remove(table_path.c_str());
  CHECK(cli({"iteration-table", "--domain", "lshape", "--levels", "1,2", "--degrees", "2",
             "--backend", "loopback", "--out", table_path},
            &out) == 0);
  CHECK(out.find(table_path) != std::string::npos);
  std::ifstream written(table_path);
  std::string header;
  std::getline(written, header);
  CHECK(header == csv_header_iteration_table());
  int data_lines = 0;
  for (std::string line; std::getline(written, line);)
    if (!line.empty()) ++data_lines;
  CHECK(data_lines == 2);

  CHECK(cli({"scaling", "--domain", "lshape", "--levels", "1", "--degree", "2", "--ranks", "1",
             "--mode", "strong"},
            &out) == 0);
  CHECK(out.find(csv_header_scaling()) != std::string::npos);
  CHECK(cli({"scaling", "--domain", "lshape", "--mode", "diagonal"}, &out, &err) == 2);
  CHECK(cli({"scaling", "--ranks", "1,x"}, &out, &err) == 2);
}

TEST_CASE("the invariant suite passes and reports one line per check") {
  std::ostringstream log;
  CHECK(run_invariant_checks(log, 42) == 0);
  std::string text = log.str();
  CHECK(std::count(text.begin(), text.end(), '\n') >= 6);
  CHECK(text.find("FAIL") == std::string::npos);
  CHECK(text.find("ok") != std::string::npos);

  std::string out;
  CHECK(cli({"check"}, &out) == 0);
  CHECK(out.find("ok") != std::string::npos);
}
