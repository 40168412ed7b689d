#pragma once

// Main loop. Each iteration takes either a smooth step or a projected step:
//
//   (a) at a sigma-regular iterate with gradient above epsilon: a halving
//       linesearch along minus the pulled-back gradient, each trial restored
//       to the variety by Gauss-Newton; step sizes optionally start from a
//       safeguarded BB value with a 5-value nonmonotone cap;
//   (b) otherwise: a projected-gradient halving step on x, re-entering the
//       parametrization through y = sqrt(x).
//
// A projected step is also forced every pgd_period iterations so the support
// can change even from smooth regions. KKT residuals are evaluated at every
// projected step (with the projection multiplier) and every kkt_every_rgd
// smooth steps (with the normal-equations multiplier); the first value at or
// below tol stops the run, and that tolerance verdict also overrides the
// iteration and time limits at exit.
//
// Normal-equation solves follow the escalation: diagonal-preconditioned CG to
// tol/1e3 within 20 iterations, then CG preconditioned by the last
// factorization, then a fresh factorization (which also refreshes the
// sigma-regularity verdict; the verdict otherwise persists across steps on an
// unchanged support).

#include <Eigen/Core>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "hadopt/errors.hpp"
#include "hadopt/geometry.hpp"
#include "hadopt/linalg.hpp"
#include "hadopt/model.hpp"
#include "hadopt/projection.hpp"
#include "hadopt/retraction.hpp"
#include "hadopt/rng.hpp"
#include "hadopt/stationarity.hpp"

namespace hadopt {

enum class SolveStatus { Converged, IterLimit, TimeLimit, Stalled };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::IterLimit: return "iter_limit";
    case SolveStatus::TimeLimit: return "time_limit";
    case SolveStatus::Stalled: return "stalled";
  }
  return "?";
}

struct IterRecord {
  Index k = 0;
  char kind = '?';          // 'R' smooth step, 'P' projected step
  double t = 0.0;           // accepted step size
  double obj = 0.0;
  double grad_norm = std::numeric_limits<double>::quiet_NaN();  // smooth steps
  double h = std::numeric_limits<double>::quiet_NaN();          // projected steps
  double kkt_max = std::numeric_limits<double>::quiet_NaN();    // when evaluated
  bool sigma_regular = false;
  Index support_size = 0;
};

struct SolverOptions {
  double epsilon = 1e-10;  // smooth branch requires ||grad|| > epsilon
  double sigma = 1e-10;    // pivot threshold for sigma-regularity
  double delta = 1e-4;     // sufficient-decrease constant
  double tol = 1e-6;       // KKT stopping tolerance
  Index max_iter = 5000;
  double max_time_sec = std::numeric_limits<double>::infinity();
  Index pgd_period = 20;   // forced projected step cadence
  bool use_bb = true;
  bool use_rgd = true;     // false: projected-gradient-only reference run
  Index kkt_every_rgd = 5;
  Index max_halvings = 50;
  double zero_tol = 1e-12;
  std::uint64_t seed = 0;  // initial point draw when no start is given
  std::function<void(const IterRecord&)> callback;
};

struct SolverReport {
  SolveStatus status = SolveStatus::IterLimit;
  KktResiduals kkt;
  double obj = 0.0;
  Index iters = 0;
  Index ldl_count = 0;
  Index pg_count = 0;
  double time_sec = 0.0;
  char multiplier_source = '?';  // 's' normal equations, 'p' projection dual
  double grad_norm = std::numeric_limits<double>::quiet_NaN();
  bool sigma_regular = false;
  Index rank = 0;
};

struct SolveResult {
  PrimalPoint point;
  VectorXd lambda;
  SolverReport report;
  std::vector<IterRecord> trace;
};

// ---------------------------------------------------------------------------

struct InitialPoint {
  PrimalPoint point;
  VectorXd lambda;
};

inline InitialPoint initial_point(const ProblemLCP& prob, std::uint64_t seed,
                                  double proj_tol = 1e-9) {
  Rng rng(seed);
  const VectorXd v = rng.normal_vec(prob.n());
  ProjectionResult pr = project_polyhedron(prob, v, proj_tol);
  InitialPoint out;
  out.point = lift_point(prob, pr.x);
  out.lambda = std::move(pr.lambda);
  return out;
}

// ---------------------------------------------------------------------------

struct RgdLinesearch {
  RetractionResult retract;
  double t = 0.0;
  Index k = 0;       // halvings from the initial trial
  double f_new = 0.0;
  Index ldl_total = 0;  // factorizations across all trials, rejected included
};

// Halving search over t = t0 (1/2)^k, k = 0, 1, ...: accept the first trial
// whose restored point satisfies f <= f_ref - t delta ||grad||^2. A diverging
// restoration counts as a rejected trial.
inline RgdLinesearch armijo_rgd(const ProblemLCP& prob, const PrimalPoint& p,
                                const VectorXd& grad, double delta,
                                const RetractionConfig& retr_cfg, double t0 = 1.0,
                                std::optional<double> f_ref = std::nullopt,
                                Index max_halvings = 50,
                                const LdlFactors* stale = nullptr) {
  const double gsq = grad.squaredNorm();
  const double ref = f_ref ? *f_ref : prob.value(p.x);
  RgdLinesearch out;
  double t = t0;
  for (Index k = 0; k <= max_halvings; ++k, t *= 0.5) {
    const VectorXd z0 = p.y - t * grad;
    RetractionResult rr;
    try {
      rr = newton_retract(prob, z0, retr_cfg, stale);
    } catch (const RetractionDiverged&) {
      continue;
    }
    out.ldl_total += rr.ldl_count;
    const double f_new = prob.value(rr.z.cwiseProduct(rr.z));
    if (f_new <= ref - t * delta * gsq) {
      out.retract = std::move(rr);
      out.t = t;
      out.k = k;
      out.f_new = f_new;
      return out;
    }
  }
  throw LinesearchFailed("smooth halving search exhausted");
}

// ---------------------------------------------------------------------------

inline SolveResult solve(const ProblemLCP& prob, const SolverOptions& opts = {},
                         const std::optional<VectorXd>& y0 = std::nullopt) {
  using clock = std::chrono::steady_clock;
  const auto t_start = clock::now();
  const auto elapsed = [&] {
    return std::chrono::duration<double>(clock::now() - t_start).count();
  };

  // The projection stops at a residual relative to 1 + |b|, while the KKT
  // gate is absolute, so the loop tolerance must absorb the scale of b or
  // projected steps re-perturb near-optimal iterates above the gate. The
  // floor keeps the semismooth Newton target reachable in double precision.
  const double proj_tol =
      std::max(opts.tol * 1e-3 / (1.0 + prob.b().norm()), 5e-14);
  const double lin_tol = proj_tol;
  RetractionConfig retr_cfg;
  retr_cfg.zero_tol = opts.zero_tol;

  SolveResult res;
  Index ldl_count = 0, pg_count = 0;

  // Start: given y0, or the projection of a seeded normal draw. A given start
  // that is far from the variety is restored first (projected as fallback).
  VectorXd warm_lambda = VectorXd::Zero(prob.m());
  PrimalPoint p;
  if (y0) {
    p = make_point(prob, *y0);
    if (*p.feas_residual > 1e-8 * (1.0 + prob.b().norm())) {
      try {
        RetractionResult rr = newton_retract(prob, p.y, retr_cfg);
        ldl_count += rr.ldl_count;
        p = make_point(prob, rr.z);
      } catch (const RetractionDiverged&) {
        ProjectionResult pr = project_polyhedron(prob, p.x, proj_tol);
        warm_lambda = pr.lambda;
        p = lift_point(prob, pr.x);
      }
    }
  } else {
    Rng rng(opts.seed);
    ProjectionResult pr = project_polyhedron(prob, rng.normal_vec(prob.n()), proj_tol);
    warm_lambda = pr.lambda;
    p = lift_point(prob, pr.x);
  }

  double f = prob.value(p.x);
  std::optional<LdlFactors> factors = prob.a().factor_gram(p.x, opts.zero_tol);
  ++ldl_count;
  bool sigma_regular = !is_sigma_singular(*factors, opts.sigma);

  // Normal-equations solve with the escalation strategy. A fresh
  // factorization refreshes the sigma verdict at the current point.
  const auto solve_linsys = [&](const VectorXd& x, const VectorXd& rhs) -> VectorXd {
    const VectorXd diag = prob.a().gram_diag(x);
    const double floor_d = std::max(1e-300, diag.size() ? diag.maxCoeff() * 1e-14 : 0.0);
    const auto apply = [&](const VectorXd& v) { return prob.a().gram_apply(x, v); };
    PcgResult p1 = pcg(apply,
                       [&](const VectorXd& r) -> VectorXd {
                         return r.cwiseQuotient(diag.cwiseMax(floor_d));
                       },
                       rhs, lin_tol, 20);
    if (p1.converged) return p1.x;
    if (factors) {
      PcgResult p2 = pcg(apply,
                         [&](const VectorXd& r) { return detail::precond_apply(*factors, r); },
                         rhs, lin_tol, 20, &p1.x);
      if (p2.converged) return p2.x;
    }
    factors = prob.a().factor_gram(x, opts.zero_tol);
    ++ldl_count;
    sigma_regular = !is_sigma_singular(*factors, opts.sigma);
    return ldl_pinv_solve(*factors, rhs, 1e-8, false);
  };

  // Best-objective iterate, returned when a limit ends the run.
  PrimalPoint best_p = p;
  double best_f = f;

  std::deque<double> fhist{f};
  const auto push_f = [&](double v) {
    fhist.push_back(v);
    while (fhist.size() > 5) fhist.pop_front();
  };

  VectorXd prev_y, prev_grad;
  bool bb_pending = false, bb_ready = false;
  VectorXd bb_s, bb_v;

  SolveStatus status = SolveStatus::IterLimit;
  VectorXd lambda_final = warm_lambda;
  char lambda_source = 'p';
  std::optional<KktResiduals> kkt_final;
  Index rgd_since_kkt = opts.kkt_every_rgd;  // evaluate at the first smooth iterate
  double last_grad_norm = std::numeric_limits<double>::quiet_NaN();

  // Loop certificates inherit the loop projection tolerance, and on large or
  // ill-conditioned instances their residual floor can sit just above tol at
  // an essentially optimal iterate. One sharp projection at the end is cheap
  // relative to the run and can certify such a point; a failed attempt
  // (target unreachable for the semismooth solve) keeps the old verdict.
  const auto refine_certificate = [&](std::optional<KktResiduals>& kk) {
    try {
      const PgdStep st =
          pgd_step(prob, p.x, 0.5, std::min(proj_tol, 1e-12), &warm_lambda);
      ++pg_count;
      const KktResiduals kc = kkt_residuals(prob, p.x, st.lambda_kkt);
      if (!kk || kc.max < kk->max) {
        kk = kc;
        lambda_final = st.lambda_kkt;
        lambda_source = 'p';
      }
    } catch (const Error&) {
    }
  };

  Index k = 0;
  for (k = 1; k <= opts.max_iter; ++k) {
    if (elapsed() > opts.max_time_sec) {
      status = SolveStatus::TimeLimit;
      break;
    }
    // Why this iteration ends up in the projected branch, if it does. A
    // forced periodic visit whose linesearch fails is skipped, not fatal;
    // the other reasons mean the smooth branch is unavailable or spent.
    enum class PgdReason { None, NoSmooth, Forced, SmoothFailed };
    PgdReason reason = PgdReason::None;
    if (!opts.use_rgd || !sigma_regular)
      reason = PgdReason::NoSmooth;
    else if (k % opts.pgd_period == 0)
      reason = PgdReason::Forced;
    bool want_pgd = reason != PgdReason::None;
    bool stepped = false;
    double kkt_at_iter = std::numeric_limits<double>::quiet_NaN();

    if (!want_pgd) {
      const VectorXd gphi = prob.gradient(p.x);
      const VectorXd rhs = prob.a().apply(gphi.cwiseProduct(p.x));
      const VectorXd lam = solve_linsys(p.x, rhs);
      if (!sigma_regular) {
        want_pgd = true;  // fresh factorization inside the solve demoted the iterate
        reason = PgdReason::NoSmooth;
      } else {
        const VectorXd grad = 2.0 * p.y.cwiseProduct(gphi - prob.a().applyT(lam));
        const double gnorm = grad.norm();
        last_grad_norm = gnorm;
        if (gnorm <= opts.epsilon) {
          want_pgd = true;
          reason = PgdReason::NoSmooth;
        } else {
          if (rgd_since_kkt >= opts.kkt_every_rgd) {
            rgd_since_kkt = 0;
            const KktResiduals kk = kkt_residuals(prob, p.x, lam);
            kkt_final = kk;
            lambda_final = lam;
            lambda_source = 's';
            kkt_at_iter = kk.max;
            if (kk.max <= opts.tol) {
              status = SolveStatus::Converged;
              break;
            }
          }
          if (bb_pending) {
            bb_s = p.y - prev_y;
            bb_v = grad - prev_grad;
            bb_ready = true;
            bb_pending = false;
          }
          double t0 = 1.0;
          if (opts.use_bb && bb_ready) {
            const double sv = bb_s.dot(bb_v);
            if (sv > 0.0)
              t0 = std::clamp(bb_s.squaredNorm() / sv, 1e-10, 1e10);
          }
          const double f_ref = opts.use_bb ? *std::max_element(fhist.begin(), fhist.end()) : f;
          try {
            RgdLinesearch ls = armijo_rgd(prob, p, grad, opts.delta, retr_cfg, t0, f_ref,
                                          opts.max_halvings, factors ? &*factors : nullptr);
            ldl_count += ls.ldl_total;
            prev_y = p.y;
            prev_grad = grad;
            bb_pending = true;
            p = make_point(prob, ls.retract.z);
            f = ls.f_new;
            push_f(f);
            if (ls.retract.last_factors) {
              factors = std::move(ls.retract.last_factors);
              sigma_regular = !is_sigma_singular(*factors, opts.sigma);
            }
            ++rgd_since_kkt;
            stepped = true;

            IterRecord rec;
            rec.k = k;
            rec.kind = 'R';
            rec.t = ls.t;
            rec.obj = f;
            rec.grad_norm = gnorm;
            rec.kkt_max = kkt_at_iter;
            rec.sigma_regular = sigma_regular;
            rec.support_size = static_cast<Index>(p.support.size());
            res.trace.push_back(rec);
            if (opts.callback) opts.callback(rec);
          } catch (const LinesearchFailed&) {
            want_pgd = true;  // smooth search exhausted; try a projected step
            reason = PgdReason::SmoothFailed;
          }
        }
      }
    }

    if (want_pgd && !stepped) {
      PgdLinesearch pls;
      try {
        pls = armijo_pgd(prob, p.x, opts.delta, opts.max_halvings, proj_tol, &warm_lambda);
      } catch (const LinesearchFailed&) {
        // No decrease at any step size: numerically stationary. The verdict
        // multiplier comes from the normal equations at a regular iterate,
        // from a fixed-size projected step otherwise; whichever certifies
        // the smaller residual wins.
        std::optional<KktResiduals> kk;
        if (sigma_regular) {
          try {
            const VectorXd gphi = prob.gradient(p.x);
            const VectorXd lam = solve_linsys(p.x, prob.a().apply(gphi.cwiseProduct(p.x)));
            kk = kkt_residuals(prob, p.x, lam);
            lambda_final = lam;
            lambda_source = 's';
          } catch (const Error&) {
          }
        }
        if (!kk || kk->max > opts.tol) {
          const PgdStep st = pgd_step(prob, p.x, 0.5, proj_tol, &warm_lambda);
          ++pg_count;
          const KktResiduals kp = kkt_residuals(prob, p.x, st.lambda_kkt);
          if (!kk || kp.max < kk->max) {
            kk = kp;
            lambda_final = st.lambda_kkt;
            lambda_source = 'p';
          }
        }
        if (kk->max > opts.tol) refine_certificate(kk);
        kkt_final = *kk;
        if (kk->max <= opts.tol) {
          status = SolveStatus::Converged;
          break;
        }
        if (reason != PgdReason::Forced) {
          status = SolveStatus::Stalled;
          break;
        }
        continue;  // forced visit at a point the projection cannot improve
      }
      ++pg_count;
      warm_lambda = pls.lambda;
      p = lift_point(prob, pls.x_plus);
      f = prob.value(p.x);
      push_f(f);
      factors = prob.a().factor_gram(p.x, opts.zero_tol);
      ++ldl_count;
      sigma_regular = !is_sigma_singular(*factors, opts.sigma);
      bb_pending = false;
      bb_ready = false;
      rgd_since_kkt = opts.kkt_every_rgd;  // next smooth iterate gets a check

      const KktResiduals kk = kkt_residuals(prob, p.x, pls.lambda_kkt);
      kkt_final = kk;
      lambda_final = pls.lambda_kkt;
      lambda_source = 'p';

      IterRecord rec;
      rec.k = k;
      rec.kind = 'P';
      rec.t = pls.t;
      rec.obj = f;
      rec.h = pls.h;
      rec.kkt_max = kk.max;
      rec.sigma_regular = sigma_regular;
      rec.support_size = static_cast<Index>(p.support.size());
      res.trace.push_back(rec);
      if (opts.callback) opts.callback(rec);

      if (kk.max <= opts.tol) {
        status = SolveStatus::Converged;
        break;
      }
    }

    if (f < best_f) {
      best_f = f;
      best_p = p;
    }
  }
  if (k > opts.max_iter) k = opts.max_iter;

  // Limits return the best-objective iterate; the tolerance verdict at that
  // point wins over the limit status.
  if (status == SolveStatus::IterLimit || status == SolveStatus::TimeLimit) {
    if (best_f < f) {
      p = best_p;
      f = best_f;
      factors = prob.a().factor_gram(p.x, opts.zero_tol);
      ++ldl_count;
      sigma_regular = !is_sigma_singular(*factors, opts.sigma);
      kkt_final.reset();
    }
    if (!kkt_final) {
      VectorXd lam;
      char src = 'p';
      bool have = false;
      if (sigma_regular) {
        try {
          const VectorXd gphi = prob.gradient(p.x);
          lam = ldl_pinv_solve(*factors, prob.a().apply(gphi.cwiseProduct(p.x)), 1e-8, false);
          src = 's';
          have = true;
        } catch (const Error&) {
        }
      }
      if (!have) {
        const PgdStep st = pgd_step(prob, p.x, 0.5, proj_tol, &warm_lambda);
        ++pg_count;
        lam = st.lambda_kkt;
        src = 'p';
      }
      kkt_final = kkt_residuals(prob, p.x, lam);
      lambda_final = lam;
      lambda_source = src;
    }
    if (kkt_final->max > opts.tol) refine_certificate(kkt_final);
    if (kkt_final->max <= opts.tol) status = SolveStatus::Converged;
  }

  res.point = std::move(p);
  res.lambda = std::move(lambda_final);
  res.report.status = status;
  res.report.kkt = kkt_final ? *kkt_final : KktResiduals{};
  res.report.obj = f;
  res.report.iters = std::min(k, opts.max_iter);
  res.report.ldl_count = ldl_count;
  res.report.pg_count = pg_count;
  res.report.time_sec = elapsed();
  res.report.multiplier_source = lambda_source;
  res.report.grad_norm = last_grad_norm;
  res.report.sigma_regular = sigma_regular;
  res.report.rank = factors ? factors->rank() : 0;
  return res;
}

}  // namespace hadopt
