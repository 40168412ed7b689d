#pragma once

// Local geometry of the feasible variety { y : A(y.*y) = b }.
//
// At a point with x = y.*y, factor A Diag(x) A^T = L Diag(d) L^T in the fixed
// constraint order. With s = pivot_support, the pair
//
//     M = I_{s,:} L^T          (rows span Range[A Diag(y)])
//     N = I_{s^c,:} L^{-1}     (N A Diag(y) = 0, N b = 0, M N^T = 0)
//
// is never materialized; both act through triangular ops on the factors. The
// tangent cone at y is { h : M A (y.*h) = 0, N A (h.*h) = 0 }, and the
// second-order test splits N A Diag(h) the same way into (V, W) rows.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <queue>
#include <utility>
#include <vector>

#include "hadopt/errors.hpp"
#include "hadopt/linalg.hpp"
#include "hadopt/model.hpp"

namespace hadopt {

// ---------------------------------------------------------------------------

struct RegularRep {
  LdlFactors f;  // factors of A Diag(x) A^T
  Index m = 0;
  Index r = 0;  // rank = |pivot_support|

  Index corank() const { return m - r; }

  // M v = (L^T v) restricted to pivot rows.
  VectorXd apply_m(const VectorXd& v) const {
    const VectorXd t = f.mul_lt(v);
    VectorXd out(r);
    for (Index k = 0; k < r; ++k) out[k] = t[f.pivot_support[k]];
    return out;
  }

  // M^T u = L (u scattered into pivot rows).
  VectorXd apply_mt(const VectorXd& u) const {
    VectorXd t = VectorXd::Zero(m);
    for (Index k = 0; k < r; ++k) t[f.pivot_support[k]] = u[k];
    return f.mul_l(t);
  }

  // N v = (L^{-1} v) restricted to non-pivot rows.
  VectorXd apply_n(const VectorXd& v) const {
    const VectorXd t = f.solve_l(v);
    VectorXd out(m - r);
    for (Index k = 0; k < m - r; ++k) out[k] = t[f.nonpivot[k]];
    return out;
  }

  // N^T u = L^{-T} (u scattered into non-pivot rows).
  VectorXd apply_nt(const VectorXd& u) const {
    VectorXd t = VectorXd::Zero(m);
    for (Index k = 0; k < m - r; ++k) t[f.nonpivot[k]] = u[k];
    return f.solve_lt(t);
  }
};

inline RegularRep regular_representation(const ProblemLCP& prob, const PrimalPoint& p,
                                         double zero_tol = 1e-12) {
  if (p.n() != prob.n()) throw DimensionMismatch("regular_representation: point size");
  RegularRep rep;
  rep.f = prob.a().factor_gram(p.x, zero_tol);
  rep.m = prob.m();
  rep.r = rep.f.rank();
  return rep;
}

// A point is sigma-singular when the smallest accepted pivot falls below
// sigma; no accepted pivots at all counts as singular.
inline bool is_sigma_singular(const LdlFactors& f, double sigma) {
  if (f.pivot_support.empty()) return true;
  return f.min_support_pivot() < sigma;
}

inline bool is_sigma_singular(const RegularRep& rep, double sigma) {
  return is_sigma_singular(rep.f, sigma);
}

// ---------------------------------------------------------------------------
// Tangent-cone membership.

struct TangentCheck {
  double res_m = 0.0;  // ||M A (y.*h)||
  double res_n = 0.0;  // ||N A (h.*h)||
  double threshold = 0.0;
  bool member = false;
};

namespace detail {
inline double memb_scale(const ProblemLCP& prob, const PrimalPoint& p) {
  const double ymax = p.y.size() ? p.y.cwiseAbs().maxCoeff() : 0.0;
  return (1.0 + prob.a().max_abs()) * (1.0 + ymax) * (1.0 + ymax);
}
}  // namespace detail

inline TangentCheck tangent_residual(const ProblemLCP& prob, const PrimalPoint& p,
                                     const RegularRep& rep, const VectorXd& h,
                                     double memb_tol = 1e-8) {
  if (h.size() != p.n()) throw DimensionMismatch("tangent_residual: h size");
  TangentCheck out;
  out.res_m = rep.apply_m(prob.a().apply(p.y.cwiseProduct(h))).norm();
  out.res_n = rep.apply_n(prob.a().apply(h.cwiseProduct(h))).norm();
  out.threshold = memb_tol * (1.0 + h.squaredNorm()) * detail::memb_scale(prob, p);
  out.member = out.res_m <= out.threshold && out.res_n <= out.threshold;
  return out;
}

// ---------------------------------------------------------------------------
// Second-order tangency. The inner factors split the corank space along
// Range[N A Diag(h)]: V rows span it, W rows annihilate it.

struct SecondOrderBasis {
  LdlFactors inner;  // factors of (N A Diag(h)) (N A Diag(h))^T
  Index dim = 0;     // corank of the outer representation

  VectorXd apply_v(const VectorXd& u) const {
    const VectorXd t = inner.mul_lt(u);
    VectorXd out(inner.rank());
    for (Index k = 0; k < inner.rank(); ++k) out[k] = t[inner.pivot_support[k]];
    return out;
  }

  VectorXd apply_w(const VectorXd& u) const {
    const VectorXd t = inner.solve_l(u);
    const Index q = dim - inner.rank();
    VectorXd out(q);
    for (Index k = 0; k < q; ++k) out[k] = t[inner.nonpivot[k]];
    return out;
  }
};

inline SecondOrderBasis second_order_basis(const ProblemLCP& prob, const PrimalPoint& p,
                                           const RegularRep& rep, const VectorXd& h,
                                           double zero_tol = 1e-12) {
  if (h.size() != p.n()) throw DimensionMismatch("second_order_basis: h size");
  const Index mr = rep.corank();
  // (N A Diag(h))(N A Diag(h))^T = N [A Diag(h.*h) A^T] N^T, assembled through
  // column solves on the outer factors.
  const MatrixHandle& a = prob.a();
  const VectorXd h2 = h.cwiseProduct(h);
  MatrixXd k = MatrixXd::Zero(rep.m, rep.m);
  {
    const VectorXd sw = h2.cwiseSqrt();
    MatrixXd b;
    if (a.stored_sparse())
      b = MatrixXd(a.sparse_ref()) * sw.asDiagonal();
    else
      b = a.dense_ref() * sw.asDiagonal();
    k.selfadjointView<Eigen::Lower>().rankUpdate(b);
    k.triangularView<Eigen::StrictlyUpper>() = k.transpose();
  }
  MatrixXd t(rep.m, rep.m);
  for (Index j = 0; j < rep.m; ++j) t.col(j) = rep.f.solve_l(k.col(j));
  MatrixXd full(rep.m, rep.m);
  {
    MatrixXd tt = t.transpose();
    for (Index j = 0; j < rep.m; ++j) full.col(j) = rep.f.solve_l(tt.col(j));
    full.transposeInPlace();  // full = L^{-1} K L^{-T}
  }
  MatrixXd sub(mr, mr);
  for (Index i = 0; i < mr; ++i)
    for (Index j = 0; j < mr; ++j) sub(i, j) = full(rep.f.nonpivot[i], rep.f.nonpivot[j]);
  sub = 0.5 * (sub + sub.transpose()).eval();
  // The inner matrix is a Gram product assembled through triangular solves; at
  // an exactly singular block the assembly leaves noise-scale negatives on the
  // diagonal. Clamp those so the factorization sees the PSD matrix it is.
  const double noise = 1e-10 * (1.0 + k.cwiseAbs().maxCoeff());
  for (Index i = 0; i < mr; ++i)
    if (sub(i, i) < 0.0 && sub(i, i) > -noise) sub(i, i) = 0.0;

  SecondOrderBasis sob;
  sob.dim = mr;
  sob.inner = ldl_psd(sub, zero_tol);
  return sob;
}

struct SecondOrderCheck {
  double res1 = 0.0;  // ||M A (y.*w + h.*h)||
  double res2 = 0.0;  // ||V N A (h.*w)||
  double res3 = 0.0;  // ||W N A (w.*w)||
  double threshold = 0.0;
  bool member = false;
};

inline SecondOrderCheck second_order_residual(const ProblemLCP& prob, const PrimalPoint& p,
                                              const RegularRep& rep,
                                              const SecondOrderBasis& sob,
                                              const VectorXd& h, const VectorXd& w,
                                              double memb_tol = 1e-8) {
  const TangentCheck tc = tangent_residual(prob, p, rep, h, memb_tol);
  if (!tc.member)
    throw NotInTangentCone("second_order_residual: h fails tangent membership");
  if (w.size() != p.n()) throw DimensionMismatch("second_order_residual: w size");
  const MatrixHandle& a = prob.a();
  SecondOrderCheck out;
  out.res1 = rep.apply_m(a.apply(p.y.cwiseProduct(w) + h.cwiseProduct(h))).norm();
  out.res2 = sob.apply_v(rep.apply_n(a.apply(h.cwiseProduct(w)))).norm();
  out.res3 = sob.apply_w(rep.apply_n(a.apply(w.cwiseProduct(w)))).norm();
  out.threshold = memb_tol * (1.0 + h.squaredNorm() + w.squaredNorm()) *
                  detail::memb_scale(prob, p);
  out.member = out.res1 <= out.threshold && out.res2 <= out.threshold &&
               out.res3 <= out.threshold;
  return out;
}

// ---------------------------------------------------------------------------
// Strata. Two feasible points lie in the same stratum iff their
// representations have equal rank and each N annihilates the other's
// A Diag(y); checked through ||N1 A Diag(y2)||_F and symmetrically.

inline bool same_stratum(const ProblemLCP& prob, const PrimalPoint& p1,
                         const PrimalPoint& p2, double memb_tol = 1e-8,
                         double feas_tol = 1e-8) {
  const double bs = 1.0 + prob.b().norm();
  if (prob.feas_residual(p1.x) > feas_tol * bs || prob.feas_residual(p2.x) > feas_tol * bs)
    throw Error("same_stratum: points must be feasible");
  const RegularRep r1 = regular_representation(prob, p1);
  const RegularRep r2 = regular_representation(prob, p2);
  if (r1.r != r2.r) return false;

  const double ymax = std::max(p1.y.size() ? p1.y.cwiseAbs().maxCoeff() : 0.0,
                               p2.y.size() ? p2.y.cwiseAbs().maxCoeff() : 0.0);
  const double tol =
      memb_tol * (1.0 + prob.a().max_abs()) * (1.0 + ymax) * (1.0 + ymax);

  const auto cross_norm = [&](const RegularRep& rep, const PrimalPoint& other) {
    double acc = 0.0;
    for (Index j : other.support) {
      const VectorXd c = prob.a().col(j) * other.y[j];
      acc += rep.apply_n(c).squaredNorm();
    }
    return std::sqrt(acc);
  };
  return cross_norm(r1, p2) <= tol && cross_norm(r2, p1) <= tol;
}

// ---------------------------------------------------------------------------
// Doubly stochastic support structure. The support of an n x n matrix is a
// bipartite graph on rows and columns; the point is smooth for the doubly
// stochastic constraints iff that graph is connected, and two points share a
// stratum iff they induce the same components.

struct BipartiteComponent {
  std::vector<Index> rows;
  std::vector<Index> cols;

  bool operator==(const BipartiteComponent& o) const {
    return rows == o.rows && cols == o.cols;
  }
};

inline std::vector<BipartiteComponent> birkhoff_components(const MatrixXd& y,
                                                           double supp_threshold = 1e-12) {
  const Index n = y.rows();
  if (y.cols() != n) throw DimensionMismatch("birkhoff_components: matrix not square");
  const double thr = supp_threshold * (1.0 + (n ? y.cwiseAbs().maxCoeff() : 0.0));

  // Adjacency by support; vertices 0..n-1 are rows, n..2n-1 columns.
  std::vector<std::vector<Index>> adj(2 * n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (std::abs(y(i, j)) > thr) {
        adj[i].push_back(n + j);
        adj[n + j].push_back(i);
      }

  std::vector<char> seen(2 * n, 0);
  std::vector<BipartiteComponent> comps;
  for (Index start = 0; start < 2 * n; ++start) {
    if (seen[start]) continue;
    seen[start] = 1;
    BipartiteComponent c;
    std::queue<Index> q;
    q.push(start);
    while (!q.empty()) {
      const Index v = q.front();
      q.pop();
      if (v < n)
        c.rows.push_back(v);
      else
        c.cols.push_back(v - n);
      for (Index w : adj[v])
        if (!seen[w]) {
          seen[w] = 1;
          q.push(w);
        }
    }
    std::sort(c.rows.begin(), c.rows.end());
    std::sort(c.cols.begin(), c.cols.end());
    comps.push_back(std::move(c));
  }
  std::sort(comps.begin(), comps.end(), [](const auto& a, const auto& b) {
    const Index ka = a.rows.empty() ? a.cols.front() + (Index)1e9 : a.rows.front();
    const Index kb = b.rows.empty() ? b.cols.front() + (Index)1e9 : b.rows.front();
    return ka < kb;
  });
  return comps;
}

}  // namespace hadopt
