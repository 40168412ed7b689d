#pragma once

// Gauss-Newton restoration onto { z : A (z.*z) = b }:
//
//     z_{k+1} = z_k + Diag(z_k) A^T l_k,
//     l_k = L_k^{-T} Diag(d_k)^+ L_k^{-1} (b - A(z_k .* z_k)) / 2,
//
// with a fresh factorization of A Diag(z_k.*z_k) A^T per step. Multiplying the
// update into z entrywise keeps exact zeros exactly zero, so the iteration
// never leaves the stratum closure of its start. Above the size threshold a
// CG solve preconditioned by the previous factors is tried before
// refactorizing.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>

#include "hadopt/errors.hpp"
#include "hadopt/linalg.hpp"
#include "hadopt/model.hpp"

namespace hadopt {

struct RetractionConfig {
  double tol = 1e-8;  // on ||A(z.*z) - b|| relative to 1 + ||b||
  Index maxit = 20;
  double divergence_factor = 10.0;  // growth over two consecutive steps
  double zero_tol = 1e-12;          // factorization pivot drop
  Index pcg_size_threshold = 5000;  // use stale-factor PCG only above this n
  Index pcg_maxit = 20;
  double pcg_tol_factor = 1e-3;
};

struct RetractionResult {
  VectorXd z;
  Index iters = 0;
  Index ldl_count = 0;
  double residual = 0.0;
  // Factors computed at the last Gauss-Newton iterate (same support as z);
  // callers reuse them as an up-to-date representation and preconditioner.
  std::optional<LdlFactors> last_factors;
};

namespace detail {
// Pseudo-inverse application of stale factors as a CG preconditioner; dropped
// pivots are floored so the operator stays positive definite.
inline VectorXd precond_apply(const LdlFactors& f, const VectorXd& v) {
  VectorXd u = f.solve_l(v);
  const double floor_piv = std::max(f.max_pivot * 1e-14, 1e-300);
  for (Index i = 0; i < f.m; ++i) u[i] /= (f.d[i] > 0.0 ? f.d[i] : floor_piv);
  return f.solve_lt(u);
}
}  // namespace detail

inline RetractionResult newton_retract(const ProblemLCP& prob, const VectorXd& z0,
                                       const RetractionConfig& cfg = {},
                                       const LdlFactors* stale = nullptr) {
  if (z0.size() != prob.n()) throw DimensionMismatch("newton_retract: z size");
  if (!z0.allFinite()) throw NonFiniteInput("newton_retract: non-finite start");
  const MatrixHandle& a = prob.a();
  const VectorXd& b = prob.b();
  const double target = cfg.tol * (1.0 + b.norm());

  RetractionResult out;
  out.z = z0;
  VectorXd resvec = b - a.apply(out.z.cwiseProduct(out.z));
  out.residual = resvec.norm();
  double res_prev1 = out.residual, res_prev2 = out.residual;

  while (out.residual > target) {
    if (out.iters >= cfg.maxit)
      throw RetractionDiverged("restoration: no convergence within maxit");

    const VectorXd x = out.z.cwiseProduct(out.z);
    VectorXd lambda;
    bool solved = false;
    if (prob.n() > cfg.pcg_size_threshold && (stale || out.last_factors)) {
      const LdlFactors& pre = out.last_factors ? *out.last_factors : *stale;
      PcgResult pr = pcg([&](const VectorXd& v) { return a.gram_apply(x, v); },
                         [&](const VectorXd& v) { return detail::precond_apply(pre, v); },
                         resvec, cfg.tol * cfg.pcg_tol_factor, cfg.pcg_maxit);
      if (pr.converged) {
        lambda = 0.5 * pr.x;
        solved = true;
      }
    }
    if (!solved) {
      LdlFactors f = a.factor_gram(x, cfg.zero_tol);
      ++out.ldl_count;
      lambda = 0.5 * ldl_pinv_solve(f, resvec, 1e-8, /*require_consistent=*/false);
      out.last_factors = std::move(f);
    }

    // z <- z .* (1 + A^T lambda): exact zeros stay exact zeros.
    out.z.array() *= (1.0 + a.applyT(lambda).array());
    ++out.iters;

    resvec = b - a.apply(out.z.cwiseProduct(out.z));
    const double res = resvec.norm();
    if (!std::isfinite(res) || (out.iters >= 2 && res > cfg.divergence_factor * res_prev2))
      throw RetractionDiverged("restoration: residual diverging");
    res_prev2 = res_prev1;
    res_prev1 = res;
    out.residual = res;
  }
  return out;
}

}  // namespace hadopt
