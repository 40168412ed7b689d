#pragma once

// First- and second-order optimality machinery at a point y with x = y.*y.
//
// Smooth multiplier: A Diag(x) A^T l = A Diag(y) (grad phi .* y) solved
// through the pseudo-inverse triangular form; the pulled-back gradient is
// 2 (grad phi .* y - Diag(y) A^T l) and vanishes iff y is first-order
// stationary for the squared parametrization.
//
// At singular points that multiplier alone can miss dual feasibility of the
// original problem: the remaining freedom is l + N^T mu, and the best mu
// solves   min_mu 0.5 || (g - A^T N^T mu)_- ||^2   (g = grad phi - A^T l).
// A zero optimum certifies a KKT multiplier; a positive one yields a witness
// z >= 0 with N A z = 0 whose square root opens a strictly decreasing
// feasible curve (escape direction).

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "hadopt/errors.hpp"
#include "hadopt/geometry.hpp"
#include "hadopt/linalg.hpp"
#include "hadopt/model.hpp"
#include "hadopt/projection.hpp"
#include "hadopt/rng.hpp"

namespace hadopt {

// ---------------------------------------------------------------------------

struct GradientResult {
  VectorXd grad;    // 2 (grad phi .* y - Diag(y) A^T lambda)
  VectorXd lambda;  // particular solution of the normal equations
  double norm = 0.0;
};

inline GradientResult riemannian_gradient(const ProblemLCP& prob, const PrimalPoint& p,
                                          const RegularRep& rep,
                                          double solve_tol = 1e-8) {
  const VectorXd gphi = prob.gradient(p.x);
  // Diag(y) (grad phi .* y) = grad phi .* x.
  const VectorXd rhs = prob.a().apply(gphi.cwiseProduct(p.x));
  GradientResult out;
  out.lambda = ldl_pinv_solve(rep.f, rhs, solve_tol, true);
  out.grad = 2.0 * p.y.cwiseProduct(gphi - prob.a().applyT(out.lambda));
  out.norm = out.grad.norm();
  return out;
}

// ---------------------------------------------------------------------------

struct DualFeasibilityOptions {
  double grad_tol = 1e-10;     // on the mu-subproblem gradient, scaled by (1 + ||g||)
  double witness_tol = 1e-10;  // violations above this produce a witness
  Index maxit = 200;
};

struct DualFeasibility {
  VectorXd mu;             // corank-sized coefficients
  VectorXd lambda_smooth;  // particular multiplier
  VectorXd lambda;         // lambda_smooth + N^T mu
  double primal_violation = 0.0;  // optimal value of the mu-subproblem
  std::optional<VectorXd> witness_z;
  Index newton_iters = 0;
};

inline DualFeasibility dual_feasibility(const ProblemLCP& prob, const PrimalPoint& p,
                                        const RegularRep& rep,
                                        const DualFeasibilityOptions& opts = {}) {
  const VectorXd gphi = prob.gradient(p.x);
  const VectorXd rhs = prob.a().apply(gphi.cwiseProduct(p.x));
  DualFeasibility out;
  out.lambda_smooth = ldl_pinv_solve(rep.f, rhs, 1e-8, true);
  const VectorXd g = gphi - prob.a().applyT(out.lambda_smooth);
  const Index mr = rep.corank();

  if (mr == 0) {
    out.mu = VectorXd::Zero(0);
    out.lambda = out.lambda_smooth;
    const VectorXd gm = neg_part(g);
    out.primal_violation = 0.5 * gm.squaredNorm();
    if (out.primal_violation > opts.witness_tol) out.witness_z = -gm;
    return out;
  }

  // min_mu 0.5 ||(g - A^T N^T mu)_-||^2 == 0.5 ||(-g + A^T N^T mu)_+||^2:
  // reuse the positive-part Newton driver with G = N A, c = -g, q = 0.
  const double amax = prob.a().max_abs();
  const double ridge = 1e-10 * (1.0 + amax * amax);
  const double target = opts.grad_tol * (1.0 + g.norm());
  detail::SsnResult r = detail::ssn_pos_part(
      [&](const VectorXd& u) { return rep.apply_n(prob.a().apply(u)); },
      [&](const VectorXd& u) { return prob.a().applyT(rep.apply_nt(u)); }, mr, -g,
      VectorXd::Zero(mr), target, ridge, opts.maxit, nullptr,
      1e12 * (1.0 + g.norm()));
  out.mu = std::move(r.theta);
  out.newton_iters = r.iters;
  out.primal_violation = 0.5 * r.u_plus.squaredNorm();
  out.lambda = out.lambda_smooth + rep.apply_nt(out.mu);
  // (-g + A^T N^T mu)_+ = -( (g - A^T N^T mu)_- ), which is the witness already.
  if (out.primal_violation > opts.witness_tol) out.witness_z = r.u_plus;
  return out;
}

// ---------------------------------------------------------------------------

struct EscapeDirection {
  VectorXd h;    // sqrt of the witness
  VectorXd w;    // support-restricted correction
  VectorXd dir;  // y.*w + h.*h; A dir = 0 and <grad phi, dir> < 0
  double directional = 0.0;
};

inline EscapeDirection escape_direction(const ProblemLCP& prob, const PrimalPoint& p,
                                        const RegularRep& rep, const VectorXd& z) {
  if (z.size() != p.n()) throw DimensionMismatch("escape_direction: z size");
  if (z.size() == 0 || z.cwiseAbs().maxCoeff() <= 1e-14)
    throw ZeroWitness("escape_direction: witness is numerically zero");
  if (z.minCoeff() < -1e-10)
    throw NegativeInput("escape_direction: witness has negative entries");

  EscapeDirection out;
  out.h = z.cwiseMax(0.0).cwiseSqrt();
  const VectorXd z_clip = out.h.cwiseProduct(out.h);

  // Solve M A Diag(y) w = -M A z for w in Range[Diag(y) A^T M^T]: build the
  // support-restricted matrix C = M A Diag(y) and use its normal equations.
  const Index r = rep.r;
  const Index ns = static_cast<Index>(p.support.size());
  MatrixXd c(r, ns);
  for (Index k = 0; k < ns; ++k) {
    const Index j = p.support[k];
    c.col(k) = rep.apply_m(prob.a().col(j) * p.y[j]);
  }
  MatrixXd gram = MatrixXd::Zero(r, r);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(c);
  gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
  const VectorXd rhs = -rep.apply_m(prob.a().apply(z_clip));
  const LdlFactors fg = ldl_psd(gram);
  const VectorXd u = ldl_pinv_solve(fg, rhs, 1e-6, true);
  const VectorXd ws = c.transpose() * u;
  out.w = VectorXd::Zero(p.n());
  for (Index k = 0; k < ns; ++k) out.w[p.support[k]] = ws[k];

  out.dir = p.y.cwiseProduct(out.w) + z_clip;
  out.directional = prob.gradient(p.x).dot(out.dir);
  return out;
}

// ---------------------------------------------------------------------------
// Restricted curvature test: phi-Hessian nonnegative on
// { v : A v = 0, supp(v) in supp(y) }. Exact kernel basis through SVD up to
// max_dense support columns; beyond that a sampled probabilistic check.

struct CurvatureReport {
  bool psd = true;
  double min_curvature = 0.0;  // smallest Rayleigh quotient found (exact: eigenvalue)
  double hess_norm_est = 0.0;
  Index kernel_dim = 0;
  bool sampled = false;
};

inline CurvatureReport second_order_check(const ProblemLCP& prob, const PrimalPoint& p,
                                          double psd_tol = 1e-8, Index max_dense = 2000,
                                          Index samples = 50, std::uint64_t seed = 7) {
  if (!prob.phi().has_hessian())
    throw NoHessian("second_order_check: objective lacks hessian_vec");
  CurvatureReport out;
  const Index ns = static_cast<Index>(p.support.size());
  if (ns == 0) return out;

  // Spectral-scale estimate by power iteration on the Hessian at x.
  Rng rng(seed);
  {
    VectorXd v = rng.normal_vec(p.n());
    v.normalize();
    for (int it = 0; it < 20; ++it) {
      VectorXd hv = prob.phi().hessian_vec(p.x, v);
      const double nv = hv.norm();
      if (nv == 0.0) break;
      out.hess_norm_est = nv;
      v = hv / nv;
    }
  }
  const double tol_abs = psd_tol * std::max(1.0, out.hess_norm_est);

  const MatrixXd a_s = prob.a().dense_cols(p.support);
  const auto embed = [&](const VectorXd& vs) {
    VectorXd v = VectorXd::Zero(p.n());
    for (Index k = 0; k < ns; ++k) v[p.support[k]] = vs[k];
    return v;
  };

  if (ns <= max_dense) {
    Eigen::BDCSVD<MatrixXd> svd(a_s, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double sv_tol = std::max(a_s.rows(), a_s.cols()) *
                          std::numeric_limits<double>::epsilon() *
                          (sv.size() ? sv[0] : 0.0);
    Index rank = 0;
    for (Index i = 0; i < sv.size(); ++i)
      if (sv[i] > sv_tol) ++rank;
    const Index q = ns - rank;
    out.kernel_dim = q;
    if (q == 0) return out;
    MatrixXd hq(q, q);
    std::vector<VectorXd> hz(q);
    for (Index j = 0; j < q; ++j)
      hz[j] = prob.phi().hessian_vec(p.x, embed(svd.matrixV().col(rank + j)));
    for (Index i = 0; i < q; ++i)
      for (Index j = 0; j < q; ++j) hq(i, j) = embed(svd.matrixV().col(rank + i)).dot(hz[j]);
    hq = 0.5 * (hq + hq.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(hq);
    out.min_curvature = es.eigenvalues().minCoeff();
    out.psd = out.min_curvature >= -tol_abs;
    return out;
  }

  // Sampled path: random support vectors projected onto Ker[A_s].
  out.sampled = true;
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(a_s);
  double worst = std::numeric_limits<double>::infinity();
  Index used = 0;
  for (Index s = 0; s < samples; ++s) {
    VectorXd vs = rng.normal_vec(ns);
    vs -= cod.solve(a_s * vs);
    const double nv = vs.norm();
    if (nv <= 1e-12) continue;
    vs /= nv;
    const VectorXd v = embed(vs);
    const double ray = v.dot(prob.phi().hessian_vec(p.x, v));
    worst = std::min(worst, ray);
    ++used;
  }
  out.kernel_dim = used;  // number of directions actually tested
  out.min_curvature = used ? worst : 0.0;
  out.psd = out.min_curvature >= -tol_abs;
  return out;
}

// ---------------------------------------------------------------------------

struct KktResiduals {
  double primal = 0.0;  // max of ||Ax-b||/(1+||b||) and ||x_-||/(1+||x||)
  double dual = 0.0;    // ||(grad phi - A^T l)_-|| / (1 + ||grad phi||)
  double comp = 0.0;   // |<grad phi - A^T l, x>| / (1 + ||grad phi||)
  double max = 0.0;
};

inline KktResiduals kkt_residuals(const ProblemLCP& prob, const VectorXd& x,
                                  const VectorXd& lambda) {
  if (x.size() != prob.n() || lambda.size() != prob.m())
    throw DimensionMismatch("kkt_residuals: sizes");
  KktResiduals out;
  const VectorXd gphi = prob.gradient(x);
  const double gs = 1.0 + gphi.norm();
  out.primal = std::max((prob.a().apply(x) - prob.b()).norm() / (1.0 + prob.b().norm()),
                        neg_part(x).norm() / (1.0 + x.norm()));
  const VectorXd gl = gphi - prob.a().applyT(lambda);
  out.dual = neg_part(gl).norm() / gs;
  out.comp = std::abs(gl.dot(x)) / gs;
  out.max = std::max({out.primal, out.dual, out.comp});
  return out;
}

}  // namespace hadopt
