#pragma once

// Euclidean projection onto { x : A x = b, x >= 0 } through its dual
//
//     min_l  0.5 || (v + A^T l)_+ ||^2  -  <b, l>,
//
// solved by a semismooth Newton method: the gradient is A (v + A^T l)_+ - b
// and the generalized Hessian A Diag(1_{v + A^T l > 0}) A^T, applied
// matrix-free with CG inside. The primal iterate x = (v + A^T l)_+ satisfies
// x >= 0 by construction; only A x = b carries residual. The projected
// gradient step and its halving linesearch live here too.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>

#include "hadopt/errors.hpp"
#include "hadopt/linalg.hpp"
#include "hadopt/model.hpp"

namespace hadopt {
namespace detail {

struct SsnResult {
  VectorXd theta;
  VectorXd u_plus;  // (c + G^T theta)_+ at the solution, bit-identical to the iterate
  double grad_norm = 0.0;
  Index iters = 0;
  Index cg_iters = 0;
};

// Minimize F(theta) = 0.5 ||(c + G^T theta)_+||^2 + <q, theta>. Convex and C^1
// with piecewise-linear gradient; Newton directions use the active-set
// indicator as the generalized Jacobian plus a small ridge.
inline SsnResult ssn_pos_part(const LinOpFn& g_apply, const LinOpFn& gt_apply,
                              Index dim, const VectorXd& c, const VectorXd& q,
                              double grad_target, double ridge, Index maxit,
                              const VectorXd* warm, double diverge_cap) {
  SsnResult out;
  VectorXd theta = warm && warm->size() == dim ? *warm : VectorXd::Zero(dim);
  VectorXd u = c + gt_apply(theta);
  VectorXd up = pos_part(u);
  double fval = 0.5 * up.squaredNorm() + q.dot(theta);
  VectorXd grad = g_apply(up) + q;

  for (Index it = 0; it < maxit; ++it) {
    const double gnorm = grad.norm();
    out.grad_norm = gnorm;
    out.iters = it;
    if (gnorm <= grad_target) {
      out.theta = std::move(theta);
      out.u_plus = std::move(up);
      return out;
    }
    if (theta.norm() > diverge_cap)
      throw InfeasibleDetected("dual iterate diverging: constraint set empty or degenerate");

    Eigen::Array<bool, Eigen::Dynamic, 1> active = u.array() > 0.0;
    const auto hv = [&](const VectorXd& p) -> VectorXd {
      VectorXd t = gt_apply(p);
      for (Index i = 0; i < t.size(); ++i)
        if (!active[i]) t[i] = 0.0;
      return g_apply(t) + ridge * p;
    };
    const double cg_tol = std::min(0.1, std::sqrt(gnorm));
    PcgResult dir = pcg(
        hv, [](const VectorXd& r) { return r; }, -grad, cg_tol,
        std::min<Index>(dim + 10, 250), nullptr, true);
    out.cg_iters += dir.iters;
    VectorXd p = std::move(dir.x);
    double slope = grad.dot(p);
    if (!(slope < 0.0)) {
      p = -grad;
      slope = -gnorm * gnorm;
    }

    // Full Newton step first: accept on a fixed gradient-norm reduction. The
    // merit function F flattens to machine precision while the gradient is
    // still well above target, and only unit steps finish the active set.
    {
      const VectorXd theta_try = theta + p;
      const VectorXd u_try = c + gt_apply(theta_try);
      const VectorXd up_try = pos_part(u_try);
      const VectorXd grad_try = g_apply(up_try) + q;
      if (grad_try.norm() <= 0.9 * gnorm) {
        theta = theta_try;
        u = u_try;
        up = up_try;
        fval = 0.5 * up.squaredNorm() + q.dot(theta);
        grad = grad_try;
        continue;
      }
    }

    double alpha = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      const VectorXd theta_try = theta + alpha * p;
      const VectorXd u_try = c + gt_apply(theta_try);
      const VectorXd up_try = pos_part(u_try);
      const double f_try = 0.5 * up_try.squaredNorm() + q.dot(theta_try);
      if (f_try <= fval + 1e-4 * alpha * slope) {
        theta = theta_try;
        u = u_try;
        up = up_try;
        fval = f_try;
        grad = g_apply(up) + q;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      // Gradient is above target but no step helps: flat to machine precision.
      out.theta = std::move(theta);
      out.u_plus = std::move(up);
      return out;
    }
  }
  out.theta = std::move(theta);
  out.u_plus = std::move(up);
  if (out.grad_norm > grad_target)
    throw MaxIterExceeded("semismooth Newton: no convergence within iteration budget");
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------

struct ProjectionResult {
  VectorXd x;       // (v + A^T lambda)_+, elementwise nonnegative
  VectorXd lambda;  // multiplier of A x = b
  double residual = 0.0;  // ||A x - b||
  Index iters = 0;
  Index cg_iters = 0;
};

inline ProjectionResult project_polyhedron(const MatrixHandle& a, const VectorXd& b,
                                           const VectorXd& v, double proj_tol = 1e-9,
                                           const VectorXd* warm_lambda = nullptr,
                                           Index maxit = 200) {
  if (a.rows() != b.size()) throw DimensionMismatch("project_polyhedron: A rows vs b");
  if (a.cols() != v.size()) throw DimensionMismatch("project_polyhedron: A cols vs v");
  const double target = proj_tol * (1.0 + b.norm());
  const double ridge = 1e-12 * static_cast<double>(a.cols());
  const double cap = 1e12 * (1.0 + b.norm());
  detail::SsnResult r = detail::ssn_pos_part(
      [&](const VectorXd& u) { return a.apply(u); },
      [&](const VectorXd& u) { return a.applyT(u); }, a.rows(), v, -b, target, ridge,
      maxit, warm_lambda, cap);
  ProjectionResult out;
  out.x = std::move(r.u_plus);
  out.lambda = std::move(r.theta);
  out.residual = r.grad_norm;  // grad of the dual is exactly A x - b
  out.iters = r.iters;
  out.cg_iters = r.cg_iters;
  return out;
}

inline ProjectionResult project_polyhedron(const ProblemLCP& prob, const VectorXd& v,
                                           double proj_tol = 1e-9,
                                           const VectorXd* warm_lambda = nullptr,
                                           Index maxit = 200) {
  return project_polyhedron(prob.a(), prob.b(), v, proj_tol, warm_lambda, maxit);
}

// ---------------------------------------------------------------------------
// Projected-gradient machinery.

struct PgdStep {
  VectorXd x_plus;
  VectorXd g;        // x_plus - x
  double h = 0.0;      // ||g|| / t
  VectorXd lambda;     // projection multiplier at x_plus (warm-start scale)
  VectorXd lambda_kkt; // lambda / t, the stationarity multiplier estimate
  double proj_residual = 0.0;
};

inline PgdStep pgd_step(const ProblemLCP& prob, const VectorXd& x, double t,
                        double proj_tol = 1e-9, const VectorXd* warm_lambda = nullptr) {
  if (!(t > 0.0)) throw Error("pgd_step: step size must be positive");
  const VectorXd v = x - t * prob.gradient(x);
  ProjectionResult pr = project_polyhedron(prob, v, proj_tol, warm_lambda);
  PgdStep s;
  s.g = pr.x - x;
  s.h = s.g.norm() / t;
  s.x_plus = std::move(pr.x);
  s.lambda_kkt = pr.lambda / t;
  s.lambda = std::move(pr.lambda);
  s.proj_residual = pr.residual;
  return s;
}

struct PgdLinesearch {
  VectorXd x_plus;
  VectorXd lambda;      // projection multiplier (warm-start scale)
  VectorXd lambda_kkt;  // lambda / t
  double t = 0.0;
  Index k = 0;  // accepted halving exponent, k >= 1
  double h = 0.0;
  double phi_new = 0.0;
  double proj_residual = 0.0;
};

// Halving search over t = (1/2)^k, k = 1, 2, ...: accept the first k with
//     phi(P(x - t grad phi)) <= phi(x) - t * delta * h_t(x)^2.
// The exponent starts at 1, not 0: candidate steps never exceed 1/2. A
// stationary x yields zero movement at k = 1 and is accepted as such.
inline PgdLinesearch armijo_pgd(const ProblemLCP& prob, const VectorXd& x, double delta,
                                Index max_halvings = 50, double proj_tol = 1e-9,
                                const VectorXd* warm_lambda = nullptr) {
  const double phi0 = prob.value(x);
  const VectorXd grad = prob.gradient(x);
  VectorXd warm = warm_lambda ? *warm_lambda : VectorXd::Zero(prob.m());
  double t = 1.0;
  for (Index k = 1; k <= max_halvings; ++k) {
    t *= 0.5;
    const VectorXd v = x - t * grad;
    ProjectionResult pr = project_polyhedron(prob, v, proj_tol, &warm);
    warm = pr.lambda;
    const VectorXd g = pr.x - x;
    const double h = g.norm() / t;
    const double phi_new = prob.value(pr.x);
    if (phi_new <= phi0 - t * delta * h * h) {
      PgdLinesearch out;
      out.x_plus = std::move(pr.x);
      out.lambda_kkt = pr.lambda / t;
      out.lambda = std::move(pr.lambda);
      out.t = t;
      out.k = k;
      out.h = h;
      out.phi_new = phi_new;
      out.proj_residual = pr.residual;
      return out;
    }
  }
  throw LinesearchFailed("projected-gradient halving search exhausted");
}

}  // namespace hadopt
