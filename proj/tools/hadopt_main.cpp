// Command-line tool: solve, verify, generate, and bench subcommands over the
// JSON problem format.

#include <CLI11.hpp>

#include "hadopt/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Polyhedral optimization via the squared parametrization"};
  app.require_subcommand(1);

  hadopt::SolveCliOptions so;
  long long s_maxit = 5000;
  double s_maxtime = 0.0;
  unsigned long long s_seed = 0;
  auto* solve = app.add_subcommand("solve", "Minimize a problem file");
  solve->add_option("problem", so.problem_path, "Problem JSON file")->required();
  solve->add_option("-o,--out", so.out_path, "Write the solution JSON here");
  solve->add_option("--init", so.init_path, "Initial point JSON (array, x, or y)");
  solve->add_flag("--trace", so.with_trace, "Embed the iteration trace in the output");
  solve->add_flag("-q,--quiet", so.quiet, "Suppress the report row");
  std::string s_bb = "on";
  solve->add_option("--tol", so.sopts.tol, "KKT stopping tolerance");
  solve->add_option("--epsilon", so.sopts.epsilon, "Smooth-branch gradient threshold");
  solve->add_option("--sigma", so.sopts.sigma, "Pivot threshold for sigma-regularity");
  solve->add_option("--delta", so.sopts.delta, "Sufficient-decrease constant");
  solve->add_option("--max-iter", s_maxit, "Iteration limit");
  solve->add_option("--max-time", s_maxtime, "Time limit in seconds (0 = none)");
  solve->add_option("--seed", s_seed, "Seed for the default initial point");
  solve->add_option("--pgd-period", so.sopts.pgd_period, "Forced projected-step cadence");
  solve->add_option("--bb", s_bb, "BB initial step sizes: on | off")
      ->check(CLI::IsMember({"on", "off"}));
  solve->add_flag_callback("--no-bb", [&] { so.sopts.use_bb = false; },
                           "Disable BB initial step sizes");
  solve->add_flag_callback("--pgd-only", [&] { so.sopts.use_rgd = false; },
                           "Projected-gradient reference mode");
  solve->add_option("--format", so.format, "Report form: table | json | csv")
      ->check(CLI::IsMember({"table", "json", "csv"}));

  hadopt::VerifyCliOptions vo;
  auto* verify = app.add_subcommand("verify", "Check a solution file against a problem");
  verify->add_option("problem", vo.problem_path, "Problem JSON file")->required();
  verify->add_option("solution", vo.solution_path, "Solution JSON file")->required();
  verify->add_option("--tol", vo.tol, "KKT acceptance tolerance");
  verify->add_option("--sigma", vo.sigma, "Pivot threshold for sigma-regularity");
  verify->add_flag("--second-order", vo.second_order, "Also test curvature on the kernel");

  hadopt::GenerateCliOptions go;
  long long g_n = 40, g_m = 10, g_k = 3;
  unsigned long long g_seed = 0;
  auto* gen = app.add_subcommand("generate", "Write a generated problem instance");
  gen->add_option("family", go.family, "cqp | gw | gwbc | simplex")->required();
  gen->add_option("-o,--out", go.out_path, "Output problem JSON")->required();
  gen->add_option("--n", g_n, "Primary size (variables or vertices)");
  gen->add_option("--m", g_m, "Constraint rows (cqp)");
  gen->add_option("--k", g_k, "Number of graphs (gwbc)");
  gen->add_option("--kappa", go.kappa, "Spectrum spread (cqp)");
  gen->add_option("--noise", go.noise, "Perturbation fraction (gw, gwbc)");
  gen->add_option("--seed", g_seed, "Generator seed");
  gen->add_option("--edges", go.edges_prefix, "Also write <prefix>_{source,target}.txt (gw)");

  hadopt::BenchCliOptions bo;
  std::vector<long long> b_sizes;
  auto* bench = app.add_subcommand("bench", "Run the generated-instance benchmark grid");
  bench->add_option("--families", bo.families, "Subset of cqp, gw, gwbc");
  bench->add_option("--sizes", b_sizes, "Grid sizes");
  bench->add_option("--seeds", bo.seeds, "Seeds per cell");
  bench->add_option("--tol", bo.tol, "KKT stopping tolerance");
  bench->add_option("--kappa", bo.kappa, "Spectrum spread for cqp cells");
  bench->add_option("--noise", bo.noise, "Perturbation fraction for gw cells");
  long long b_maxit = 2000;
  bench->add_option("--max-iter", b_maxit, "Iteration limit per run");
  bench->add_option("-o,--out", bo.out_csv, "Write CSV rows here");

  CLI11_PARSE(app, argc, argv);

  if (solve->parsed()) {
    so.sopts.max_iter = s_maxit;
    if (s_maxtime > 0.0) so.sopts.max_time_sec = s_maxtime;
    so.sopts.seed = s_seed;
    if (s_bb == "off") so.sopts.use_bb = false;
    return hadopt::run_solve(so);
  }
  if (verify->parsed()) return hadopt::run_verify(vo);
  if (gen->parsed()) {
    go.n = g_n;
    go.m = g_m;
    go.k = g_k;
    go.seed = g_seed;
    return hadopt::run_generate(go);
  }
  if (bench->parsed()) {
    bo.max_iter = b_maxit;
    if (!b_sizes.empty()) {
      bo.sizes.clear();
      for (long long v : b_sizes) bo.sizes.push_back(v);
    }
    return hadopt::run_bench(bo);
  }
  return 1;
}
