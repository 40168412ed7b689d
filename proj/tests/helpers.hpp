#pragma once
// Shared oracles and samplers for the test suite.
//
// Everything here is deliberately implemented with different algorithms than
// the library under test (sorting, brute-force support enumeration,
// alternating projections, dense pseudoinverse iterations), so that agreement
// between the two is evidence and not an echo.

#include <hadopt/hadopt.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

namespace testutil {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using hadopt::Index;

// ---------------------------------------------------------------------------
// Projection oracles.

// Euclidean projection of v onto {x >= 0, sum x = 1}: sort, find the pivot
// index, shift, clip. O(n log n) and exact up to rounding.
inline VectorXd simplex_project_sort(const VectorXd& v) {
  const Index n = v.size();
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cum = 0.0;
  double theta = (u.empty() ? 0.0 : u[0]) - 1.0;
  for (Index j = 0; j < n; ++j) {
    cum += u[static_cast<std::size_t>(j)];
    const double cand = (cum - 1.0) / static_cast<double>(j + 1);
    if (u[static_cast<std::size_t>(j)] - cand > 0.0) theta = cand;
  }
  return (v.array() - theta).max(0.0).matrix();
}

// Exact projection onto {Ax = b, x >= 0} by enumerating every candidate
// support. For each subset F of free coordinates, project v onto the affine
// set {A_F x_F = b, x_Z = 0} (minimum-norm multiplier via a complete
// orthogonal decomposition), keep candidates that are feasible, and return
// the feasible candidate of least distance. The true projection's own support
// is among the masks, and the affine projection for that mask reproduces it,
// so the minimum is the answer. Only usable for small n (2^n masks).
inline VectorXd project_enumerate(const MatrixXd& a, const VectorXd& b, const VectorXd& v) {
  const Index n = a.cols();
  const Index m = a.rows();
  if (n > 20) throw hadopt::Error("project_enumerate: n too large");
  const double bscale = 1.0 + b.lpNorm<Eigen::Infinity>();
  double best = std::numeric_limits<double>::infinity();
  VectorXd best_x;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    std::vector<Index> free_idx;
    for (Index i = 0; i < n; ++i)
      if (mask & (std::uint64_t{1} << i)) free_idx.push_back(i);
    const Index f = static_cast<Index>(free_idx.size());
    VectorXd x = VectorXd::Zero(n);
    if (f == 0) {
      if (b.lpNorm<Eigen::Infinity>() > 1e-10 * bscale) continue;
    } else {
      MatrixXd af(m, f);
      VectorXd vf(f);
      for (Index k = 0; k < f; ++k) {
        af.col(k) = a.col(free_idx[static_cast<std::size_t>(k)]);
        vf(k) = v(free_idx[static_cast<std::size_t>(k)]);
      }
      Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(af * af.transpose());
      const VectorXd theta = cod.solve(b - af * vf);
      const VectorXd xf = vf + af.transpose() * theta;
      if ((af * xf - b).lpNorm<Eigen::Infinity>() > 1e-9 * bscale) continue;
      if (xf.minCoeff() < -1e-11) continue;
      for (Index k = 0; k < f; ++k) x(free_idx[static_cast<std::size_t>(k)]) = std::max(xf(k), 0.0);
    }
    const double obj = (x - v).squaredNorm();
    if (obj < best) {
      best = obj;
      best_x = x;
    }
  }
  if (best_x.size() == 0) throw hadopt::Error("project_enumerate: no feasible support");
  return best_x;
}

// Dykstra's alternating projections between the row-stochastic and
// column-stochastic nonnegative matrices. Converges to the Euclidean
// projection onto their intersection, the doubly stochastic matrices.
inline MatrixXd dykstra_doubly_stochastic(const MatrixXd& v, Index maxit = 20000,
                                          double tol = 1e-13) {
  const Index n = v.rows();
  MatrixXd x = v, p = MatrixXd::Zero(n, n), q = MatrixXd::Zero(n, n);
  for (Index it = 0; it < maxit; ++it) {
    MatrixXd y(n, n);
    const MatrixXd xp = x + p;
    for (Index i = 0; i < n; ++i)
      y.row(i) = simplex_project_sort(xp.row(i).transpose()).transpose();
    p = xp - y;
    MatrixXd x_next(n, n);
    const MatrixXd yq = y + q;
    for (Index j = 0; j < n; ++j) x_next.col(j) = simplex_project_sort(yq.col(j));
    q = yq - x_next;
    const double change = (x_next - x).lpNorm<Eigen::Infinity>();
    x = x_next;
    if (change < tol && it > 10) break;
  }
  return x;
}

// ---------------------------------------------------------------------------
// Feasibility restoration oracle.

// How far must z0 move to restore A(z o z) = b? Gauss-Newton with dense
// minimum-norm steps; returns the distance to the restored point (an upper
// bound on the true distance, tight to second order) plus the final residual
// so callers can insist the restoration actually converged.
struct Restoration {
  double moved = 0.0;
  double residual = 0.0;
  bool converged = false;
};

inline Restoration restore_feasibility(const MatrixXd& a, const VectorXd& b,
                                       const VectorXd& z0, Index maxit = 80) {
  const double bscale = 1.0 + b.lpNorm<Eigen::Infinity>();
  VectorXd z = z0;
  Restoration out;
  for (Index it = 0; it < maxit; ++it) {
    const VectorXd c = a * z.cwiseProduct(z) - b;
    out.residual = c.lpNorm<Eigen::Infinity>();
    if (out.residual <= 1e-13 * bscale) {
      out.converged = true;
      break;
    }
    const MatrixXd j = 2.0 * a * z.asDiagonal();
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(j);
    const VectorXd delta = cod.solve(-c);
    if (!delta.allFinite()) break;
    z += delta;
  }
  out.moved = (z - z0).norm();
  return out;
}

// ---------------------------------------------------------------------------
// Curve-fitting oracles for tangency.
//
// A direction h is tangent at y exactly when the distance from y + t h to the
// variety is o(t); a pair (h, w) is second-order admissible exactly when the
// distance from y + t h + (t^2/2) w is o(t^2). We measure the distance with
// the restoration oracle on a decade grid and look at the normalized ratios.

enum class CurveClass { Member, NonMember, Ambiguous };

struct CurveVerdict {
  CurveClass cls = CurveClass::Ambiguous;
  std::vector<double> ratios;
};

// Shared ratio-sequence classifier. Ratios are dist/t^order on a decade grid,
// largest t first. Members must drop by at least drop_factor per decade until
// they hit the measurement floor; non-members must end above the flat
// threshold. The floor keeps exactly-feasible curves (restored distance at
// rounding level) from failing the drop test.
inline CurveVerdict classify_ratios(const std::vector<double>& ratios, double drop_factor,
                                    double floor_abs, double flat_threshold) {
  CurveVerdict v;
  v.ratios = ratios;
  bool drops = true;
  for (std::size_t k = 0; k + 1 < ratios.size(); ++k) {
    const double need = std::max(ratios[k] / drop_factor, floor_abs);
    if (ratios[k + 1] > need) drops = false;
  }
  const double last = ratios.back();
  if (drops && last <= flat_threshold) v.cls = CurveClass::Member;
  else if (!drops && last > flat_threshold) v.cls = CurveClass::NonMember;
  else v.cls = CurveClass::Ambiguous;
  return v;
}

inline CurveVerdict tangent_curve_oracle(const MatrixXd& a, const VectorXd& b,
                                         const VectorXd& y, const VectorXd& h) {
  const double hs = h.norm();
  std::vector<double> ratios;
  for (double t : {1e-1, 1e-2, 1e-3, 1e-4}) {
    const Restoration r = restore_feasibility(a, b, y + t * h);
    ratios.push_back(r.moved / t);
  }
  const double scale = 1.0 + y.lpNorm<Eigen::Infinity>();
  return classify_ratios(ratios, 3.0, 1e-9 * scale, 1e-2 * hs);
}

inline CurveVerdict second_order_curve_oracle(const MatrixXd& a, const VectorXd& b,
                                              const VectorXd& y, const VectorXd& h,
                                              const VectorXd& w) {
  std::vector<double> ratios;
  for (double t : {1e-1, 1e-2, 1e-3}) {
    const Restoration r = restore_feasibility(a, b, y + t * h + 0.5 * t * t * w);
    ratios.push_back(r.moved / (t * t));
  }
  const double scale = 1.0 + y.lpNorm<Eigen::Infinity>();
  const double hs = 1.0 + h.norm() + w.norm();
  return classify_ratios(ratios, 3.0, 3e-7 * scale, 1e-2 * hs);
}

// ---------------------------------------------------------------------------
// Feasible points and tangent samplers.

// A strictly validated feasible point of {Ax = b, x >= 0}: project a random
// positive vector onto the polyhedron and insist on a tiny residual.
inline VectorXd feasible_point(const hadopt::ProblemLCP& prob, hadopt::Rng& rng,
                               double lo = 0.2, double hi = 1.2) {
  const VectorXd v = rng.uniform_vec(prob.n(), lo, hi);
  const auto pr = hadopt::project_polyhedron(prob, v, 1e-11, nullptr, 400);
  if (pr.residual > 1e-8 * (1.0 + prob.b().lpNorm<Eigen::Infinity>()))
    throw hadopt::Error("feasible_point: projection did not converge");
  return pr.x;
}

// Dense support-restricted kernel sample: h supported on supp(y) with
// A Diag(y) h = 0. Returns a zero vector when the kernel is trivial.
inline VectorXd support_kernel_sample(const MatrixXd& a, const VectorXd& y,
                                      const std::vector<Index>& support, hadopt::Rng& rng) {
  const Index n = a.cols();
  const Index s = static_cast<Index>(support.size());
  if (s == 0) return VectorXd::Zero(n);
  MatrixXd ay(a.rows(), s);
  for (Index k = 0; k < s; ++k)
    ay.col(k) = a.col(support[static_cast<std::size_t>(k)]) * y(support[static_cast<std::size_t>(k)]);
  Eigen::FullPivLU<MatrixXd> lu(ay);
  const MatrixXd ker = lu.kernel();  // s x kdim (or a zero column when trivial)
  if (ker.cols() == 0 || (ker.cols() == 1 && ker.col(0).norm() < 1e-12)) return VectorXd::Zero(n);
  const VectorXd coef = rng.normal_vec(ker.cols());
  const VectorXd hs = ker * coef;
  VectorXd h = VectorXd::Zero(n);
  for (Index k = 0; k < s; ++k) h(support[static_cast<std::size_t>(k)]) = hs(k);
  return h;
}

// Minimum-norm on-support solution of A Diag(y) w = rhs. The right-hand sides
// used by the samplers lie in the span of the support columns, so the residual
// check is a guard, not a tolerance game.
inline VectorXd support_solve(const MatrixXd& a, const VectorXd& y,
                              const std::vector<Index>& support, const VectorXd& rhs) {
  const Index n = a.cols();
  const Index s = static_cast<Index>(support.size());
  MatrixXd ay(a.rows(), s);
  for (Index k = 0; k < s; ++k)
    ay.col(k) = a.col(support[static_cast<std::size_t>(k)]) * y(support[static_cast<std::size_t>(k)]);
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(ay);
  const VectorXd ws = cod.solve(rhs);
  if ((ay * ws - rhs).lpNorm<Eigen::Infinity>() > 1e-8 * (1.0 + rhs.lpNorm<Eigen::Infinity>()))
    throw hadopt::Error("support_solve: inconsistent right-hand side");
  VectorXd w = VectorXd::Zero(n);
  for (Index k = 0; k < s; ++k) w(support[static_cast<std::size_t>(k)]) = ws(k);
  return w;
}

// ---------------------------------------------------------------------------
// Doubly stochastic test fixtures.

// Sinkhorn balancing of a positive matrix; with enough sweeps the result is
// doubly stochastic to near rounding.
inline MatrixXd sinkhorn(MatrixXd x, Index sweeps = 400) {
  const Index n = x.rows();
  for (Index it = 0; it < sweeps; ++it) {
    for (Index i = 0; i < n; ++i) x.row(i) /= x.row(i).sum();
    for (Index j = 0; j < n; ++j) x.col(j) /= x.col(j).sum();
  }
  // One last row sweep so row sums are exact; column sums stay at rounding level.
  for (Index i = 0; i < n; ++i) x.row(i) /= x.row(i).sum();
  return x;
}

// A doubly stochastic matrix with exactly k diagonal blocks. block_rows[i] and
// block_cols[i] give the row/column index sets of block i; each block is a
// Sinkhorn-balanced positive square matrix, so the support's bipartite graph
// has exactly k connected components.
inline MatrixXd planted_block_ds(const std::vector<std::vector<Index>>& block_rows,
                                 const std::vector<std::vector<Index>>& block_cols, Index n,
                                 hadopt::Rng& rng) {
  MatrixXd y = MatrixXd::Zero(n, n);
  for (std::size_t bl = 0; bl < block_rows.size(); ++bl) {
    const auto& rs = block_rows[bl];
    const auto& cs = block_cols[bl];
    const Index s = static_cast<Index>(rs.size());
    const MatrixXd blk = sinkhorn(MatrixXd(rng.uniform_mat(s, s).array() + 0.3));
    for (Index i = 0; i < s; ++i)
      for (Index j = 0; j < s; ++j)
        y(rs[static_cast<std::size_t>(i)], cs[static_cast<std::size_t>(j)]) = blk(i, j);
  }
  return y;
}

// Random partition of {0,...,n-1} into k nonempty ordered parts.
inline std::vector<std::vector<Index>> random_partition(Index n, Index k, hadopt::Rng& rng) {
  std::vector<Index> perm(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  for (Index i = n - 1; i > 0; --i) {
    const Index j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(i + 1)));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  // Choose k-1 distinct cut points in [1, n-1]; every part is nonempty.
  std::set<Index> cuts;
  while (static_cast<Index>(cuts.size()) < k - 1)
    cuts.insert(1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n - 1))));
  std::vector<std::vector<Index>> parts;
  std::vector<Index> cur;
  for (Index i = 0; i < n; ++i) {
    if (cuts.count(i) && !cur.empty()) {
      parts.push_back(cur);
      cur.clear();
    }
    cur.push_back(perm[static_cast<std::size_t>(i)]);
  }
  parts.push_back(cur);
  return parts;
}

// ---------------------------------------------------------------------------
// Hand-built degenerate linear programs.
//
// The three-variable motif (u, v, w) with constraints u + v = 1, v + w = 1 and
// costs (0, 1, 2) has its optimum at (0, 1, 0). There the support is {v}, the
// two constraint gradients collapse onto one direction, and the minimum-norm
// least-squares multiplier (1/2, 1/2) prices u at -1/2: dual infeasible. The
// multipliers that do certify optimality form the segment lambda_1 in [-1, 0].
// Summing six motifs and one well-behaved pair (a + b = 1, costs (0, 1))
// gives n = 20, m = 13, and corank 6 at the combined optimum.
struct DegenerateLp {
  hadopt::SparseMat a;
  VectorXd b;
  VectorXd c;
  VectorXd x_opt;
};

inline DegenerateLp degenerate_lp() {
  const Index motifs = 6;
  const Index n = 3 * motifs + 2;
  const Index m = 2 * motifs + 1;
  std::vector<Eigen::Triplet<double>> trip;
  VectorXd b = VectorXd::Ones(m);
  VectorXd c = VectorXd::Zero(n);
  VectorXd x = VectorXd::Zero(n);
  for (Index k = 0; k < motifs; ++k) {
    const Index col = 3 * k, row = 2 * k;
    trip.emplace_back(row, col, 1.0);
    trip.emplace_back(row, col + 1, 1.0);
    trip.emplace_back(row + 1, col + 1, 1.0);
    trip.emplace_back(row + 1, col + 2, 1.0);
    c(col + 1) = 1.0;
    c(col + 2) = 2.0;
    x(col + 1) = 1.0;
  }
  trip.emplace_back(2 * motifs, 3 * motifs, 1.0);
  trip.emplace_back(2 * motifs, 3 * motifs + 1, 1.0);
  c(3 * motifs + 1) = 1.0;
  x(3 * motifs) = 1.0;
  DegenerateLp lp;
  lp.a.resize(m, n);
  lp.a.setFromTriplets(trip.begin(), trip.end());
  lp.b = b;
  lp.c = c;
  lp.x_opt = x;
  return lp;
}

// The smallest saddle of the same flavor: constraints u + v = 1, v + w = 1,
// costs (0, 1, 0), point (0, 1, 0). Every certifying multiplier must price
// both u and w at zero, which is impossible, so the point is a strict saddle.
// Worked out by hand: the best multiplier leaves violation 1/4, the witness
// direction is (1/2, 0, 1/2), and the escape direction (1/2, -1/2, 1/2) has
// slope -1/2.
struct SaddleLp {
  hadopt::SparseMat a;
  VectorXd b;
  VectorXd c;
  VectorXd x_saddle;
};

inline SaddleLp saddle_lp() {
  SaddleLp s;
  std::vector<Eigen::Triplet<double>> trip = {
      {0, 0, 1.0}, {0, 1, 1.0}, {1, 1, 1.0}, {1, 2, 1.0}};
  s.a.resize(2, 3);
  s.a.setFromTriplets(trip.begin(), trip.end());
  s.b = VectorXd::Ones(2);
  s.c = VectorXd::Zero(3);
  s.c(1) = 1.0;
  s.x_saddle = VectorXd::Zero(3);
  s.x_saddle(1) = 1.0;
  return s;
}

inline hadopt::ProblemLCP lp_problem(const hadopt::SparseMat& a, const VectorXd& b,
                                     const VectorXd& c, const std::string& name) {
  hadopt::SparseMat q(c.size(), c.size());
  auto phi = std::make_shared<hadopt::ObjectiveCQP>(q, c);
  return hadopt::ProblemLCP(hadopt::MatrixHandle(a), b, phi, name);
}

// ---------------------------------------------------------------------------
// Finite differences.

template <class F>
VectorXd fd_gradient(F&& value, const VectorXd& x, double step = 1e-5) {
  VectorXd g(x.size());
  VectorXd e = x;
  for (Index i = 0; i < x.size(); ++i) {
    const double xi = x(i);
    e(i) = xi + step;
    const double up = value(e);
    e(i) = xi - step;
    const double dn = value(e);
    e(i) = xi;
    g(i) = (up - dn) / (2.0 * step);
  }
  return g;
}

inline double max_rel_err(const VectorXd& got, const VectorXd& want) {
  double worst = 0.0;
  const double scale = 1.0 + want.lpNorm<Eigen::Infinity>();
  for (Index i = 0; i < got.size(); ++i)
    worst = std::max(worst, std::abs(got(i) - want(i)) / scale);
  return worst;
}

}  // namespace testutil
