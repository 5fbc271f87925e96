// Command-line front end: solve / verify / kernel / single-rod.
//
// Exit codes: 0 ok, 2 numerical tolerance failure, 3 input validation failure.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

#include "stentnet/stentnet.hpp"

namespace fs = std::filesystem;
using namespace stentnet;

namespace {

std::string g17(double v) { return format_g17(v); }

struct MeshSweep {
  std::vector<int> sizes;
  static MeshSweep make(int base, int refinements) {
    MeshSweep s;
    int m = base;
    for (int k = 0; k < std::max(1, refinements); ++k, m *= 2) s.sizes.push_back(m);
    return s;
  }
};

int run_solve(const std::string& file, int mesh_n, int refine, const std::string& out_dir,
              double tol) {
  LoadedStent ls = load_stent(file);
  const StentGraph& g = ls.graph;
  LoadFunction f = ls.load_function();
  MeshSweep sweep = MeshSweep::make(mesh_n, refine);

  struct Row {
    int m;
    SaddleSolveReport rep;
    StrongResiduals strong;
    Mesh mesh{};
  };
  std::vector<std::optional<Row>> rows(sweep.sizes.size());
  std::exception_ptr fail;
  parallel_for(static_cast<int>(sweep.sizes.size()), [&](int k) {
    try {
      Row row;
      row.m = sweep.sizes[k];
      row.mesh = Mesh::uniform(g, row.m);
      DofMap dofs(g, row.mesh);
      auto sys = build_system(g, row.mesh, dofs, f);
      SolveOptions opt;
      opt.tol = tol;
      row.rep = solve_mixed(g, row.mesh, dofs, sys, opt);
      row.strong = strong_residual(g, row.mesh, row.rep.state, f);
      rows[k] = std::move(row);
    } catch (...) {
      if (!fail) fail = std::current_exception();
    }
  });
  if (fail) std::rethrow_exception(fail);

  std::cout << "# m  inextensibility  force_balance  moment_balance  primal_rel  constraint_rel\n";
  for (const auto& row : rows) {
    double inext = 0, fb = 0, mb = 0;
    for (const auto& e : row->strong.edge) {
      inext = std::max(inext, e.inextensibility);
      fb = std::max(fb, e.force_balance);
      mb = std::max(mb, e.moment_balance);
    }
    std::cout << row->m << ' ' << g17(inext) << ' ' << g17(fb) << ' ' << g17(mb) << ' '
              << g17(row->rep.primal_residual) << ' ' << g17(row->rep.constraint_residual)
              << '\n';
  }

  const Row& fin = *rows.back();
  fs::create_directories(out_dir);
  write_result_table((fs::path(out_dir) / "result.tsv").string(), g, fin.mesh, fin.rep.state);
  std::vector<std::pair<std::string, std::string>> kv;
  for (int c = 0; c < 3; ++c)
    kv.emplace_back("alpha_" + std::to_string(c + 1), g17(fin.rep.state.alpha(c)));
  for (int c = 0; c < 3; ++c)
    kv.emplace_back("beta_" + std::to_string(c + 1), g17(fin.rep.state.beta(c)));
  kv.emplace_back("mesh_elements_per_edge", std::to_string(fin.m));
  kv.emplace_back("solver_branch", fin.rep.branch);
  kv.emplace_back("primal_residual", g17(fin.rep.primal_residual));
  kv.emplace_back("constraint_residual", g17(fin.rep.constraint_residual));
  kv.emplace_back("condition_estimate", g17(fin.rep.condition_estimate));
  kv.emplace_back("vertex_jump_y", g17(fin.strong.vertex_jump_y));
  kv.emplace_back("vertex_jump_theta", g17(fin.strong.vertex_jump_theta));
  write_summary((fs::path(out_dir) / "summary.txt").string(), kv);
  std::cout << "alpha " << fin.rep.state.alpha.transpose() << "\n";
  std::cout << "beta " << fin.rep.state.beta.transpose() << "\n";
  std::cout << "wrote " << (fs::path(out_dir) / "result.tsv").string() << "\n";
  return 0;
}

int run_verify(const std::string& file, int mesh_n, int refine) {
  LoadedStent ls = load_stent(file);
  const StentGraph& g = ls.graph;

  auto cs = class_s_check(g);
  std::cout << "class_S " << (cs.in_class_s ? "true" : "false") << "\n";
  std::cout << "class_S_kernel_dim " << cs.kernel_dim << "\n";

  BlockSaddle bs = assemble_block_saddle(g);
  auto [hplus, hnorm] = symmetric_pseudo_inverse(bs.h);
  (void)hplus;
  std::cout << "hplus_norm " << g17(hnorm) << "\n";
  std::cout << "h_symmetry_defect " << g17((bs.h - bs.h.transpose()).norm()) << "\n";

  MeshSweep sweep = MeshSweep::make(mesh_n, refine);
  struct Row {
    int m = 0;
    double cp = 0, beta_h = 0, c_ell = 0;
    int nullspace = 0, kernel = 0;
  };
  std::vector<Row> rows(sweep.sizes.size());
  std::exception_ptr fail;
  parallel_for(static_cast<int>(sweep.sizes.size()), [&](int k) {
    try {
      Row row;
      row.m = sweep.sizes[k];
      Mesh mesh = Mesh::uniform(g, row.m);
      DofMap dofs(g, mesh);
      auto sys = build_system(g, mesh, dofs, zero_load());
      auto x = assemble_h1_gram(g, mesh, dofs);
      auto mq = assemble_dual_gram(g, mesh, dofs);
      auto is = discrete_infsup_constant(sys.B, x, mq);
      row.beta_h = is.beta_h;
      row.nullspace = is.dual_nullspace_dim;
      row.cp = poincare_constant(g, mesh, dofs);
      auto ell = ellipticity_constant(g, mesh, dofs, sys);
      row.c_ell = ell.c_ell;
      row.kernel = ell.constraint_kernel_dim;
      rows[k] = row;
    } catch (...) {
      if (!fail) fail = std::current_exception();
    }
  });
  if (fail) std::rethrow_exception(fail);

  for (const auto& row : rows) {
    std::string suffix = "_m" + std::to_string(row.m);
    std::cout << "C_P" << suffix << " " << g17(row.cp) << "\n";
    std::cout << "beta_h" << suffix << " " << g17(row.beta_h) << "\n";
    std::cout << "c_ell" << suffix << " " << g17(row.c_ell) << "\n";
    std::cout << "dual_nullspace_dim" << suffix << " " << row.nullspace << "\n";
    std::cout << "constraint_kernel_dim" << suffix << " " << row.kernel << "\n";
  }
  return 0;
}

int run_kernel(const std::string& file, int mesh_n, const std::string& out_dir) {
  LoadedStent ls = load_stent(file);
  const StentGraph& g = ls.graph;
  Mesh mesh = Mesh::uniform(g, mesh_n);
  DofMap dofs(g, mesh);
  auto k = assemble_stiffness(g, mesh, dofs);
  fs::create_directories(out_dir);
  for (int idx = 0; idx < 6; ++idx) {
    RigidMotion r;
    if (idx < 3)
      r.translation = Vec3::Unit(idx);
    else
      r.rotation = Vec3::Unit(idx - 3);
    VecX u = rigid_motion_field(g, mesh, dofs, r);
    auto state = StentState::from_solution(g, mesh, dofs, u, VecX::Zero(dofs.n_dual()));
    std::string path =
        (fs::path(out_dir) / ("kernel_" + std::to_string(idx) + ".tsv")).string();
    write_result_table(path, g, mesh, state);
    std::cout << "kernel_energy_" << idx << " " << g17(u.dot(k * u)) << "\n";
  }
  std::cout << "wrote kernel_0.tsv .. kernel_5.tsv in " << out_dir << "\n";
  return 0;
}

int run_single_rod(const std::string& file, bool clamped, int mesh_n,
                   const std::string& out_dir, double tol) {
  LoadedStent ls = load_stent(file);
  const StentGraph& g = ls.graph;
  if (g.n_edges() != 1)
    throw ValidationError("single-rod mode expects a file with exactly one edge");
  Mesh mesh = Mesh::uniform(g, mesh_n);
  DofMap dofs(g, mesh, clamped ? BoundaryMode::ClampedEnds : BoundaryMode::Free);
  auto sys = build_system(g, mesh, dofs, ls.load_function());
  SolveOptions opt;
  opt.tol = tol;
  opt.detect_dual_nullspace = true;
  SaddleSolveReport rep = clamped ? solve_single_rod(g, mesh, dofs, sys, opt)
                                  : solve_mixed(g, mesh, dofs, sys, opt);
  std::cout << "mode " << (clamped ? "clamped" : "free") << "\n";
  std::cout << "solver_branch " << rep.branch << "\n";
  std::cout << "dual_nullspace_dim " << rep.dual_nullspace_dim << "\n";
  std::cout << "primal_residual " << g17(rep.primal_residual) << "\n";
  std::cout << "constraint_residual " << g17(rep.constraint_residual) << "\n";
  if (!clamped) {
    std::cout << "alpha " << rep.state.alpha.transpose() << "\n";
    std::cout << "beta " << rep.state.beta.transpose() << "\n";
  }
  fs::create_directories(out_dir);
  write_result_table((fs::path(out_dir) / "result.tsv").string(), g, mesh, rep.state);
  std::cout << "wrote " << (fs::path(out_dir) / "result.tsv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stentnet: equilibrium of elastic stent networks of curved rods"};
  app.require_subcommand(1);

  std::string file, out_dir = ".";
  int mesh_n = 4, refine = 1;
  double tol = 1e-9;
  bool clamped = false;

  auto* solve = app.add_subcommand("solve", "solve the mixed equilibrium problem");
  solve->add_option("file", file, "stent description file")->required();
  solve->add_option("--mesh", mesh_n, "elements per edge (default 4)");
  solve->add_option("--refine", refine, "number of meshes in the refinement sweep");
  solve->add_option("--out", out_dir, "output directory");
  solve->add_option("--tol", tol, "relative residual tolerance");

  auto* verify = app.add_subcommand("verify", "well-posedness diagnostics and constants");
  verify->add_option("file", file)->required();
  verify->add_option("--mesh", mesh_n, "elements per edge of the coarsest mesh");
  verify->add_option("--refine", refine, "number of meshes in the refinement sweep");

  auto* kernel = app.add_subcommand("kernel", "emit the six rigid-motion kernel fields");
  kernel->add_option("file", file)->required();
  kernel->add_option("--mesh", mesh_n);
  kernel->add_option("--out", out_dir);

  auto* rod = app.add_subcommand("single-rod", "solve a one-edge problem");
  rod->add_option("file", file)->required();
  rod->add_flag("--clamped", clamped, "clamp both ends (y = theta = 0)");
  rod->add_option("--mesh", mesh_n);
  rod->add_option("--out", out_dir);
  rod->add_option("--tol", tol);

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) return run_solve(file, mesh_n, refine, out_dir, tol);
    if (verify->parsed()) return run_verify(file, mesh_n, refine);
    if (kernel->parsed()) return run_kernel(file, mesh_n, out_dir);
    if (rod->parsed()) return run_single_rod(file, clamped, mesh_n, out_dir, tol);
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 3;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 3;
  } catch (const ToleranceNotMet& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const SingularSystem& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const NotClassS& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
