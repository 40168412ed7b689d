#pragma once

// Rank-revealing LDL^T for positive semidefinite matrices, in the fixed row
// order of the input (no permutation), plus the pseudo-inverse triangular
// solves and a preconditioned CG built on top of it.
//
// The factorization S = L Diag(d) L^T keeps zero pivots explicit: a pivot
// below zero_tol times the largest pivot seen so far is stored as exactly 0
// and its column of L is left as the unit column. That normalization makes
// factors of equal-rank-structure matrices comparable and lets callers read
// the numerical range of S off pivot_support directly.

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <utility>
#include <vector>

#include "hadopt/errors.hpp"

namespace hadopt {

using Index = Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using SparseMat = Eigen::SparseMatrix<double>;

inline VectorXd pos_part(const VectorXd& v) { return v.cwiseMax(0.0); }
inline VectorXd neg_part(const VectorXd& v) { return v.cwiseMin(0.0); }

// ---------------------------------------------------------------------------
// Factors

struct LdlFactors {
  Index m = 0;
  VectorXd d;                        // pivots, exact zeros where dropped
  std::vector<Index> pivot_support;  // ascending indices with d > 0
  std::vector<Index> nonpivot;       // ascending complement
  double zero_tol = 0.0;
  double max_pivot = 0.0;

  bool sparse = false;
  MatrixXd dense_l;  // unit lower triangular when !sparse
  // Sparse storage: per column, the strictly-below-diagonal entries (row, value)
  // in ascending row order. Zero-pivot columns are empty.
  std::vector<std::vector<std::pair<Index, double>>> cols;

  Index rank() const { return static_cast<Index>(pivot_support.size()); }

  double min_support_pivot() const {
    double mn = 0.0;
    bool first = true;
    for (Index i : pivot_support) {
      if (first || d[i] < mn) mn = d[i];
      first = false;
    }
    return first ? 0.0 : mn;
  }

  // z = L^{-1} v
  VectorXd solve_l(const VectorXd& v) const {
    VectorXd z = v;
    if (!sparse) {
      dense_l.triangularView<Eigen::UnitLower>().solveInPlace(z);
    } else {
      for (Index j = 0; j < m; ++j) {
        const double zj = z[j];
        if (zj != 0.0)
          for (const auto& [i, val] : cols[j]) z[i] -= val * zj;
      }
    }
    return z;
  }

  // z = L^{-T} v
  VectorXd solve_lt(const VectorXd& v) const {
    VectorXd z = v;
    if (!sparse) {
      dense_l.transpose().triangularView<Eigen::UnitUpper>().solveInPlace(z);
    } else {
      for (Index j = m - 1; j >= 0; --j) {
        double s = z[j];
        for (const auto& [i, val] : cols[j]) s -= val * z[i];
        z[j] = s;
      }
    }
    return z;
  }

  VectorXd mul_l(const VectorXd& v) const {
    if (!sparse) return dense_l.triangularView<Eigen::UnitLower>() * v;
    VectorXd out = v;
    for (Index j = 0; j < m; ++j) {
      const double vj = v[j];
      if (vj != 0.0)
        for (const auto& [i, val] : cols[j]) out[i] += val * vj;
    }
    return out;
  }

  VectorXd mul_lt(const VectorXd& v) const {
    if (!sparse) return dense_l.transpose().triangularView<Eigen::UnitUpper>() * v;
    VectorXd out = v;
    for (Index j = 0; j < m; ++j) {
      double s = 0.0;
      for (const auto& [i, val] : cols[j]) s += val * v[i];
      out[j] += s;
    }
    return out;
  }

  // L Diag(d) L^T v, used for residual checks against the factors themselves.
  VectorXd reapply(const VectorXd& v) const {
    VectorXd t = mul_lt(v);
    t.array() *= d.array();
    return mul_l(t);
  }

  MatrixXd dense_l_matrix() const {
    if (!sparse) return dense_l;
    MatrixXd L = MatrixXd::Identity(m, m);
    for (Index j = 0; j < m; ++j)
      for (const auto& [i, val] : cols[j]) L(i, j) = val;
    return L;
  }

  MatrixXd reconstruct() const {
    const MatrixXd L = dense_l_matrix();
    return L * d.asDiagonal() * L.transpose();
  }
};

namespace detail {

inline void finalize_support(LdlFactors& f) {
  f.pivot_support.clear();
  f.nonpivot.clear();
  for (Index i = 0; i < f.m; ++i) {
    if (f.d[i] > 0.0)
      f.pivot_support.push_back(i);
    else
      f.nonpivot.push_back(i);
  }
}

[[noreturn]] inline void throw_indefinite(Index k, double piv) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "negative pivot %.3e at position %lld", piv,
                static_cast<long long>(k));
  throw IndefiniteMatrix(buf);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Dense factorization.
//
// Right-looking, lower triangle only. zero_tol is relative to the largest
// pivot accepted so far; a pivot more negative than that same threshold
// (measured against the diagonal scale before any pivot is accepted) raises
// IndefiniteMatrix.

inline LdlFactors ldl_psd(const MatrixXd& s, double zero_tol = 1e-12) {
  const Index m = s.rows();
  if (s.cols() != m) throw DimensionMismatch("ldl_psd: matrix not square");
  if (!s.allFinite()) throw NonFiniteInput("ldl_psd: non-finite entries");
  const double scale = m > 0 ? s.cwiseAbs().maxCoeff() : 0.0;
  if (m > 0 && (s - s.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + scale))
    throw NotSymmetric("ldl_psd: matrix is not symmetric");

  LdlFactors f;
  f.m = m;
  f.sparse = false;
  f.zero_tol = zero_tol;
  f.d = VectorXd::Zero(m);
  f.dense_l = MatrixXd::Identity(m, m);

  MatrixXd w = s;  // workspace; only the lower triangle is referenced
  double max_piv = 0.0;
  const double diag_scale = m > 0 ? s.diagonal().cwiseAbs().maxCoeff() : 0.0;
  for (Index k = 0; k < m; ++k) {
    const double piv = w(k, k);
    const double thr = zero_tol * std::max(max_piv, piv > 0.0 ? 0.0 : diag_scale);
    if (piv <= thr) {
      if (piv < -std::max(thr, zero_tol * diag_scale)) detail::throw_indefinite(k, piv);
      // Dropped pivot: d stays 0, column of L stays the unit column, and the
      // trailing block is left untouched (its k-th column is residual noise).
      continue;
    }
    f.d[k] = piv;
    max_piv = std::max(max_piv, piv);
    const Index rem = m - k - 1;
    if (rem > 0) {
      VectorXd v = w.col(k).tail(rem);
      f.dense_l.col(k).tail(rem) = v / piv;
      w.bottomRightCorner(rem, rem).selfadjointView<Eigen::Lower>().rankUpdate(
          v, -1.0 / piv);
    }
  }
  f.max_pivot = max_piv;
  detail::finalize_support(f);
  return f;
}

// ---------------------------------------------------------------------------
// Sparse factorization (up-looking, row by row). Input must carry both
// triangles. Dropped pivots zero their column, so later rows skip them and
// the stored pattern stays a subset of the true elimination pattern.

inline LdlFactors ldl_psd(const SparseMat& s_in, double zero_tol = 1e-12) {
  SparseMat s = s_in;
  s.makeCompressed();
  const Index m = s.rows();
  if (s.cols() != m) throw DimensionMismatch("ldl_psd: matrix not square");
  {
    SparseMat diff = SparseMat(s.transpose()) - s;
    double amax = 0.0, smax = 0.0;
    for (Index j = 0; j < s.outerSize(); ++j)
      for (SparseMat::InnerIterator it(s, j); it; ++it)
        smax = std::max(smax, std::abs(it.value()));
    for (Index j = 0; j < diff.outerSize(); ++j)
      for (SparseMat::InnerIterator it(diff, j); it; ++it)
        amax = std::max(amax, std::abs(it.value()));
    if (amax > 1e-10 * (1.0 + smax)) throw NotSymmetric("ldl_psd: matrix is not symmetric");
  }

  LdlFactors f;
  f.m = m;
  f.sparse = true;
  f.zero_tol = zero_tol;
  f.d = VectorXd::Zero(m);
  f.cols.assign(m, {});

  VectorXd w = VectorXd::Zero(m);  // scatter workspace for one row
  std::vector<Index> touched;
  double max_piv = 0.0;
  double diag_scale = 0.0;
  for (Index k = 0; k < m; ++k) diag_scale = std::max(diag_scale, std::abs(s.coeff(k, k)));

  for (Index k = 0; k < m; ++k) {
    // Scatter the strictly-upper part of column k (rows < k) and the diagonal.
    double piv = 0.0;
    touched.clear();
    for (SparseMat::InnerIterator it(s, k); it; ++it) {
      if (it.row() < k) {
        w[it.row()] = it.value();
        touched.push_back(it.row());
      } else if (it.row() == k) {
        piv = it.value();
      }
    }
    // Forward substitution: row k of L against the columns already built.
    for (Index j = 0; j < k; ++j) {
      const double wj = w[j];
      if (wj == 0.0) continue;
      if (f.d[j] > 0.0) {
        const double lkj = wj / f.d[j];
        for (const auto& [i, val] : f.cols[j]) {
          if (i >= k) break;
          if (w[i] == 0.0) touched.push_back(i);
          w[i] -= lkj * f.d[j] * val;
        }
        piv -= lkj * wj;
        f.cols[j].emplace_back(k, lkj);
      }
      w[j] = 0.0;
    }
    for (Index i : touched) w[i] = 0.0;

    const double thr = zero_tol * std::max(max_piv, piv > 0.0 ? 0.0 : diag_scale);
    if (piv <= thr) {
      if (piv < -std::max(thr, zero_tol * diag_scale)) detail::throw_indefinite(k, piv);
      // Dropped pivot: remove this row's tentative entries so the column stays
      // consistent with d[k] = 0? They live in other columns and are valid
      // L(k, j) values; only column k itself must stay empty, which it is.
      continue;
    }
    f.d[k] = piv;
    max_piv = std::max(max_piv, piv);
  }
  f.max_pivot = max_piv;
  detail::finalize_support(f);
  return f;
}

// ---------------------------------------------------------------------------
// lambda = L^{-T} D^+ L^{-1} rhs.
//
// Solves S lambda = rhs exactly when rhs lies in Range(S). With
// require_consistent the factor-level residual is checked and
// InconsistentSystem raised when rhs has a component outside the range;
// Gauss-Newton restoration passes false and keeps the least-squares-like
// iterate instead.

inline VectorXd ldl_pinv_solve(const LdlFactors& f, const VectorXd& rhs,
                               double solve_tol = 1e-8,
                               bool require_consistent = true) {
  if (rhs.size() != f.m) throw DimensionMismatch("ldl_pinv_solve: rhs size");
  VectorXd u = f.solve_l(rhs);
  for (Index i = 0; i < f.m; ++i) u[i] = f.d[i] > 0.0 ? u[i] / f.d[i] : 0.0;
  VectorXd lambda = f.solve_lt(u);
  if (require_consistent) {
    const double res = (f.reapply(lambda) - rhs).norm();
    if (res > solve_tol * (1.0 + rhs.norm())) {
      char buf[96];
      std::snprintf(buf, sizeof(buf), "residual %.3e outside range tolerance", res);
      throw InconsistentSystem(buf);
    }
  }
  return lambda;
}

// ---------------------------------------------------------------------------
// Preconditioned conjugate gradient.

struct PcgResult {
  VectorXd x;
  Index iters = 0;
  bool converged = false;
  double residual = 0.0;  // true residual norm at exit
};

using LinOpFn = std::function<VectorXd(const VectorXd&)>;

// Solves apply(x) = rhs for an SPD (possibly semidefinite but consistent)
// operator; convergence is ||apply(x) - rhs|| <= tol * (1 + ||rhs||), or
// tol * ||rhs|| in relative mode (inexact-Newton forcing), verified on the
// true residual before the flag is set.
inline PcgResult pcg(const LinOpFn& apply, const LinOpFn& precond, const VectorXd& rhs,
                     double tol, Index maxit, const VectorXd* x0 = nullptr,
                     bool relative = false) {
  PcgResult out;
  const Index n = rhs.size();
  const double target = relative ? tol * rhs.norm() : tol * (1.0 + rhs.norm());
  VectorXd x = x0 ? *x0 : VectorXd::Zero(n);
  VectorXd r = rhs - apply(x);
  if (r.norm() <= target) {
    out.x = std::move(x);
    out.converged = true;
    out.residual = r.norm();
    return out;
  }
  VectorXd z = precond(r);
  VectorXd p = z;
  double rz = r.dot(z);
  for (Index it = 0; it < maxit; ++it) {
    const VectorXd ap = apply(p);
    const double pap = p.dot(ap);
    if (!(pap > 0.0)) break;  // null-space direction or breakdown
    const double alpha = rz / pap;
    x += alpha * p;
    r -= alpha * ap;
    out.iters = it + 1;
    if (r.norm() <= target) {
      const double true_res = (rhs - apply(x)).norm();
      if (true_res <= target) {
        out.x = std::move(x);
        out.converged = true;
        out.residual = true_res;
        return out;
      }
      r = rhs - apply(x);  // recurrence drifted; continue with the true residual
    }
    z = precond(r);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  out.residual = (rhs - apply(x)).norm();
  out.converged = out.residual <= target;
  out.x = std::move(x);
  return out;
}

// ---------------------------------------------------------------------------
// Dense-or-sparse matrix wrapper. One type so problems can carry either
// storage; the gram path below 5% density runs fully sparse.

class MatrixHandle {
 public:
  MatrixHandle() = default;
  explicit MatrixHandle(MatrixXd a) : dense_(std::move(a)) {
    nnz_ = (dense_.array() != 0.0).count();
  }
  explicit MatrixHandle(SparseMat a) : sparse_storage_(true), sp_(std::move(a)) {
    sp_.makeCompressed();
    sp_.prune(0.0);
    nnz_ = sp_.nonZeros();
  }

  Index rows() const { return sparse_storage_ ? sp_.rows() : dense_.rows(); }
  Index cols() const { return sparse_storage_ ? sp_.cols() : dense_.cols(); }
  bool stored_sparse() const { return sparse_storage_; }
  Index nonzeros() const { return nnz_; }

  double density() const {
    const double cells = static_cast<double>(rows()) * static_cast<double>(cols());
    return cells > 0 ? static_cast<double>(nnz_) / cells : 0.0;
  }
  bool sparse_path() const { return density() < 0.05; }

  double max_abs() const {
    if (!sparse_storage_) return dense_.size() ? dense_.cwiseAbs().maxCoeff() : 0.0;
    double mx = 0.0;
    for (Index j = 0; j < sp_.outerSize(); ++j)
      for (SparseMat::InnerIterator it(sp_, j); it; ++it)
        mx = std::max(mx, std::abs(it.value()));
    return mx;
  }

  VectorXd apply(const VectorXd& v) const {
    if (v.size() != cols()) throw DimensionMismatch("MatrixHandle::apply");
    return sparse_storage_ ? VectorXd(sp_ * v) : VectorXd(dense_ * v);
  }

  VectorXd applyT(const VectorXd& v) const {
    if (v.size() != rows()) throw DimensionMismatch("MatrixHandle::applyT");
    return sparse_storage_ ? VectorXd(sp_.transpose() * v) : VectorXd(dense_.transpose() * v);
  }

  VectorXd col(Index j) const {
    if (!sparse_storage_) return dense_.col(j);
    VectorXd c = VectorXd::Zero(rows());
    for (SparseMat::InnerIterator it(sp_, j); it; ++it) c[it.row()] = it.value();
    return c;
  }

  // Dense submatrix of the listed columns, in the given order.
  MatrixXd dense_cols(const std::vector<Index>& idx) const {
    MatrixXd out(rows(), static_cast<Index>(idx.size()));
    for (Index k = 0; k < static_cast<Index>(idx.size()); ++k) out.col(k) = col(idx[k]);
    return out;
  }

  MatrixXd to_dense() const { return sparse_storage_ ? MatrixXd(sp_) : dense_; }
  const SparseMat& sparse_ref() const { return sp_; }
  const MatrixXd& dense_ref() const { return dense_; }

  // diag(A Diag(w) A^T)
  VectorXd gram_diag(const VectorXd& w) const {
    if (w.size() != cols()) throw DimensionMismatch("MatrixHandle::gram_diag");
    if (!sparse_storage_) return dense_.array().square().matrix() * w;
    VectorXd out = VectorXd::Zero(rows());
    for (Index j = 0; j < sp_.outerSize(); ++j) {
      const double wj = w[j];
      if (wj == 0.0) continue;
      for (SparseMat::InnerIterator it(sp_, j); it; ++it)
        out[it.row()] += it.value() * it.value() * wj;
    }
    return out;
  }

  // A Diag(w) A^T v without forming the gram.
  VectorXd gram_apply(const VectorXd& w, const VectorXd& v) const {
    return apply(w.cwiseProduct(applyT(v)));
  }

  // Factor A Diag(w) A^T, w >= 0 elementwise (weights here are always squares).
  LdlFactors factor_gram(const VectorXd& w, double zero_tol = 1e-12) const {
    if (w.size() != cols()) throw DimensionMismatch("MatrixHandle::factor_gram");
    const VectorXd sw = w.cwiseMax(0.0).cwiseSqrt();
    if (sparse_path()) {
      SparseMat a = sparse_storage_ ? sp_ : dense_.sparseView();
      SparseMat b = a * sw.asDiagonal();
      SparseMat g = SparseMat(b * b.transpose());
      SparseMat gs = SparseMat(0.5 * (g + SparseMat(g.transpose())));
      return ldl_psd(gs, zero_tol);
    }
    const MatrixXd a = sparse_storage_ ? MatrixXd(sp_) : dense_;
    MatrixXd b = a * sw.asDiagonal();
    MatrixXd g = MatrixXd::Zero(rows(), rows());
    g.selfadjointView<Eigen::Lower>().rankUpdate(b);
    g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
    return ldl_psd(g, zero_tol);
  }

 private:
  bool sparse_storage_ = false;
  MatrixXd dense_;
  SparseMat sp_;
  Index nnz_ = 0;
};

}  // namespace hadopt
