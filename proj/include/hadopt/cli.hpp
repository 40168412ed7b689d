#pragma once

// Subcommand drivers behind the command-line tool. Each returns a process
// exit code: 0 success, 2 runtime failure, 3 finished without meeting the
// tolerance (solve/verify). Argument parsing stays in the tool's main.

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "hadopt/errors.hpp"
#include "hadopt/geometry.hpp"
#include "hadopt/io.hpp"
#include "hadopt/model.hpp"
#include "hadopt/problems.hpp"
#include "hadopt/solver.hpp"
#include "hadopt/stationarity.hpp"

namespace hadopt {

inline void print_report_row(std::FILE* out, const std::string& name,
                             const SolverReport& r) {
  std::fprintf(out,
               "%-28s %-10s Rp=%.3e Rd=%.3e Rc=%.3e obj=%.10e t=%.3fs it=%lld "
               "ldl=%lld pg=%lld\n",
               name.c_str(), to_string(r.status), r.kkt.primal, r.kkt.dual, r.kkt.comp,
               r.obj, r.time_sec, static_cast<long long>(r.iters),
               static_cast<long long>(r.ldl_count), static_cast<long long>(r.pg_count));
}

// ---------------------------------------------------------------------------

struct SolveCliOptions {
  std::string problem_path;
  std::string out_path;
  std::string init_path;
  std::string format = "table";  // table | json | csv
  bool with_trace = false;
  bool quiet = false;
  SolverOptions sopts;
};

// Exit codes: 0 solved to tolerance, 1 unusable input, 2 solver stopped on a
// limit (outputs are still written).
inline int run_solve(const SolveCliOptions& o) {
  try {
    const ProblemLCP prob = load_problem(o.problem_path);
    std::optional<VectorXd> y0;
    if (!o.init_path.empty()) {
      const Json j = load_json(o.init_path);
      if (j.is_object() && j.contains("y")) {
        y0 = vec_from_json(j.at("y"));
      } else {
        y0 = lift(point_from_json(j));
      }
      if (y0->size() != prob.n()) throw DimensionMismatch("initial point has wrong length");
    }
    const SolveResult res = solve(prob, o.sopts, y0);
    if (!o.quiet) {
      const SolverReport& r = res.report;
      if (o.format == "json") {
        std::printf("%s\n", report_to_json(r).dump(1).c_str());
      } else if (o.format == "csv") {
        std::printf("name,status,Rp,Rd,Rc,obj,time_sec,iter,ldl,pg\n");
        std::printf("%s,%s,%.17g,%.17g,%.17g,%.17g,%.6f,%lld,%lld,%lld\n",
                    prob.name().c_str(), to_string(r.status), r.kkt.primal, r.kkt.dual,
                    r.kkt.comp, r.obj, r.time_sec, static_cast<long long>(r.iters),
                    static_cast<long long>(r.ldl_count), static_cast<long long>(r.pg_count));
      } else {
        print_report_row(stdout, prob.name(), r);
      }
    }
    if (!o.out_path.empty())
      save_json(o.out_path, solution_to_json(prob, res, o.with_trace));
    return res.report.status == SolveStatus::Converged ? 0 : 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

// ---------------------------------------------------------------------------

struct VerifyCliOptions {
  std::string problem_path;
  std::string solution_path;
  double tol = 1e-6;
  double sigma = 1e-10;
  bool second_order = false;
};

inline int run_verify(const VerifyCliOptions& o) {
  try {
    const ProblemLCP prob = load_problem(o.problem_path);
    const LoadedSolution sol = solution_from_json(load_json(o.solution_path));
    if (sol.x.size() != prob.n()) throw DimensionMismatch("solution has wrong length");

    // Prefer the stored parametrized point when it reproduces x exactly.
    PrimalPoint p;
    if (sol.y && sol.y->size() == prob.n() &&
        (sol.y->cwiseProduct(*sol.y) - sol.x).lpNorm<Eigen::Infinity>() <=
            1e-12 * (1.0 + sol.x.lpNorm<Eigen::Infinity>())) {
      p = make_point(prob, *sol.y);
    } else {
      p = lift_point(prob, sol.x);
    }

    const double feas = prob.feas_residual(p.x);
    const RegularRep rep = regular_representation(prob, p);
    const bool singular = is_sigma_singular(rep.f, o.sigma);
    std::printf("problem            %s\n", prob.name().c_str());
    std::printf("n, m               %lld, %lld\n", static_cast<long long>(prob.n()),
                static_cast<long long>(prob.m()));
    std::printf("support size       %lld\n", static_cast<long long>(p.support.size()));
    std::printf("rank r             %lld (corank %lld)\n", static_cast<long long>(rep.r),
                static_cast<long long>(rep.corank()));
    std::printf("sigma-regular      %s (sigma=%.1e, min support pivot %.3e)\n",
                singular ? "no" : "yes", o.sigma, rep.f.min_support_pivot());
    std::printf("feas residual      %.6e\n", feas);

    VectorXd lambda;
    char source = '?';
    if (sol.lambda && sol.lambda->size() == prob.m()) {
      lambda = *sol.lambda;
      source = 'f';
    } else if (!singular) {
      lambda = riemannian_gradient(prob, p, rep).lambda;
      source = 's';
    } else {
      lambda = pgd_step(prob, p.x, 0.5, 1e-10).lambda_kkt;
      source = 'p';
    }
    std::printf("multiplier         %s\n", source == 'f'   ? "from file"
                                           : source == 's' ? "normal equations"
                                                           : "projection dual");

    if (!singular) {
      const GradientResult gr = riemannian_gradient(prob, p, rep);
      std::printf("grad norm          %.6e\n", gr.norm);
    } else {
      const DualFeasibility df = dual_feasibility(prob, p, rep);
      std::printf("dual violation     %.6e\n", df.primal_violation);
      if (df.witness_z) {
        const EscapeDirection esc = escape_direction(prob, p, rep, *df.witness_z);
        std::printf("descent direction  slope %.6e\n", esc.directional);
      }
    }

    if (o.second_order && prob.phi().has_hessian()) {
      const CurvatureReport cr = second_order_check(prob, p);
      std::printf("curvature          %s (min %.6e, kernel dim %lld%s)\n",
                  cr.psd ? "nonnegative" : "negative found", cr.min_curvature,
                  static_cast<long long>(cr.kernel_dim), cr.sampled ? ", sampled" : "");
    }

    KktResiduals kk = kkt_residuals(prob, p.x, lambda);
    // A sigma-regular point can still have corank, and then the candidate
    // multiplier is only one of a family; dual feasibility may need the
    // corank correction. Attempt the repair before failing the verdict.
    if (kk.max > o.tol && rep.corank() > 0) {
      try {
        const DualFeasibility df = dual_feasibility(prob, p, rep);
        const KktResiduals kc = kkt_residuals(prob, p.x, df.lambda);
        std::printf("corank repair      violation %.6e\n", df.primal_violation);
        if (kc.max < kk.max) kk = kc;
      } catch (const Error&) {
      }
    }
    std::printf("KKT residuals      Rp=%.6e Rd=%.6e Rc=%.6e\n", kk.primal, kk.dual, kk.comp);
    const bool ok = kk.max <= o.tol;
    std::printf("verify             %s (max %.6e %s tol %.1e)\n", ok ? "OK" : "FAIL", kk.max,
                ok ? "<=" : ">", o.tol);
    return ok ? 0 : 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

// ---------------------------------------------------------------------------

struct GenerateCliOptions {
  std::string family;  // cqp | gw | gwbc | simplex
  std::string out_path;
  std::string edges_prefix;  // gw only: write edge lists alongside
  Index n = 40;
  Index m = 10;
  Index k = 3;
  double kappa = 100.0;
  double noise = 0.1;
  std::uint64_t seed = 0;
};

inline int run_generate(const GenerateCliOptions& o) {
  try {
    std::optional<ProblemLCP> prob;
    if (o.family == "cqp") {
      prob = gen_random_cqp(o.n, o.m, o.kappa, o.seed);
    } else if (o.family == "gw") {
      const KnnGraphPair g = gen_knn_graph(o.n, o.noise, o.seed);
      char name[96];
      std::snprintf(name, sizeof(name), "gw_n%lld_p%g_s%" PRIu64,
                    static_cast<long long>(o.n), o.noise, o.seed);
      prob = make_gw_problem(g.source, g.target, name);
      if (!o.edges_prefix.empty()) {
        std::ofstream(o.edges_prefix + "_source.txt") << graph_to_edge_list(g.source);
        std::ofstream(o.edges_prefix + "_target.txt") << graph_to_edge_list(g.target);
      }
    } else if (o.family == "gwbc") {
      prob = gen_gwbc_instance(o.n, o.k, o.noise, o.seed);
    } else if (o.family == "simplex") {
      prob = gen_simplex_projection(o.n, o.seed);
    } else {
      std::fprintf(stderr, "error: unknown family '%s'\n", o.family.c_str());
      return 1;
    }
    save_problem(o.out_path, *prob);
    std::printf("%s  n=%lld m=%lld  -> %s\n", prob->name().c_str(),
                static_cast<long long>(prob->n()), static_cast<long long>(prob->m()),
                o.out_path.c_str());
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

// ---------------------------------------------------------------------------

struct BenchCliOptions {
  std::vector<std::string> families{"cqp", "gw"};
  std::vector<Index> sizes{40, 80};
  int seeds = 2;
  double tol = 1e-6;
  Index max_iter = 2000;
  double kappa = 100.0;
  double noise = 0.1;
  std::string out_csv;
};

// Runs the default solver and a projected-gradient-only baseline on a grid of
// generated instances and reports one CSV row per instance.
inline int run_bench(const BenchCliOptions& o) {
  try {
    std::FILE* csv = nullptr;
    if (!o.out_csv.empty()) {
      csv = std::fopen(o.out_csv.c_str(), "w");
      if (!csv) throw Error("cannot write " + o.out_csv);
    }
    const char* header =
        "family,name,n,m,kappa,seed,status,Rp,Rd,Rc,obj,time_sec,iter,ldl,pg,"
        "baseline_obj,baseline_time_sec,obj_rel_gap\n";
    if (csv) std::fputs(header, csv);

    for (const std::string& fam : o.families) {
      for (const Index size : o.sizes) {
        for (int s = 0; s < o.seeds; ++s) {
          std::optional<ProblemLCP> prob;
          double kappa_col = std::numeric_limits<double>::quiet_NaN();
          if (fam == "cqp") {
            prob = gen_random_cqp(size, std::max<Index>(1, size / 4), o.kappa,
                                  static_cast<std::uint64_t>(s));
            kappa_col = o.kappa;
          } else if (fam == "gw") {
            prob = gen_gw_instance(std::max<Index>(8, size / 4), o.noise,
                                   static_cast<std::uint64_t>(s));
          } else if (fam == "gwbc") {
            prob = gen_gwbc_instance(std::max<Index>(6, size / 8), 2, o.noise,
                                     static_cast<std::uint64_t>(s));
          } else {
            std::fprintf(stderr, "error: unknown family '%s'\n", fam.c_str());
            if (csv) std::fclose(csv);
            return 1;
          }

          SolverOptions sopts;
          sopts.tol = o.tol;
          sopts.max_iter = o.max_iter;
          SolveResult main_run, base_run;
          try {
            main_run = solve(*prob, sopts);
            SolverOptions bopts = sopts;
            bopts.use_rgd = false;
            base_run = solve(*prob, bopts);
          } catch (const std::exception& e) {
            // A failed cell is recorded and the grid continues.
            std::fprintf(stderr, "error: %s: %s\n", prob->name().c_str(), e.what());
            if (csv)
              std::fprintf(csv, "%s,%s,%lld,%lld,%g,%d,error,,,,,,,,,,,\n", fam.c_str(),
                           prob->name().c_str(), static_cast<long long>(prob->n()),
                           static_cast<long long>(prob->m()), kappa_col, s);
            continue;
          }

          print_report_row(stdout, prob->name(), main_run.report);
          const double gap = (main_run.report.obj - base_run.report.obj) /
                             (1.0 + std::abs(base_run.report.obj));
          if (csv) {
            std::fprintf(csv,
                         "%s,%s,%lld,%lld,%g,%d,%s,%.17g,%.17g,%.17g,%.17g,%.6f,%lld,"
                         "%lld,%lld,%.17g,%.6f,%.17g\n",
                         fam.c_str(), prob->name().c_str(),
                         static_cast<long long>(prob->n()),
                         static_cast<long long>(prob->m()), kappa_col, s,
                         to_string(main_run.report.status), main_run.report.kkt.primal,
                         main_run.report.kkt.dual, main_run.report.kkt.comp,
                         main_run.report.obj, main_run.report.time_sec,
                         static_cast<long long>(main_run.report.iters),
                         static_cast<long long>(main_run.report.ldl_count),
                         static_cast<long long>(main_run.report.pg_count),
                         base_run.report.obj, base_run.report.time_sec, gap);
          }
        }
      }
    }
    if (csv) std::fclose(csv);
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace hadopt
