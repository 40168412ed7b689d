#pragma once

// Built-in problem families: random convex QPs, optimal-transport style
// couplings for Gromov-Wasserstein distances between weighted graphs, and
// the barycenter variant with several couplings stacked into one variable.

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "hadopt/errors.hpp"
#include "hadopt/linalg.hpp"
#include "hadopt/model.hpp"
#include "hadopt/rng.hpp"

namespace hadopt {

// ---------------------------------------------------------------------------
// Transport polytope: couplings X (mr x nc) with row sums mu and column sums
// nu, as a constraint matrix on vec(X) (column-major). The last column-sum
// row is dropped; it is implied by the rest since sum(mu) = sum(nu).

inline std::pair<SparseMat, VectorXd> transport_constraints(const VectorXd& mu,
                                                            const VectorXd& nu) {
  const Index mr = mu.size(), nc = nu.size();
  if (mr == 0 || nc == 0) throw DimensionMismatch("transport marginals are empty");
  if (mu.minCoeff() < 0.0 || nu.minCoeff() < 0.0)
    throw NegativeInput("transport marginals must be nonnegative");
  const double smu = mu.sum(), snu = nu.sum();
  if (std::abs(smu - snu) > 1e-12 * (1.0 + std::abs(smu)))
    throw MarginalMismatch("marginal sums differ");

  const Index rows = mr + nc - 1;
  SparseMat a(rows, mr * nc);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(2 * mr * nc));
  for (Index j = 0; j < nc; ++j)
    for (Index i = 0; i < mr; ++i) {
      const Index col = i + j * mr;
      trip.emplace_back(i, col, 1.0);
      if (j + 1 < nc) trip.emplace_back(mr + j, col, 1.0);
    }
  a.setFromTriplets(trip.begin(), trip.end());
  VectorXd b(rows);
  b.head(mr) = mu;
  b.tail(nc - 1) = nu.head(nc - 1);
  return {std::move(a), std::move(b)};
}

// Doubly stochastic matrices of order n.
inline std::pair<SparseMat, VectorXd> birkhoff_constraints(Index n) {
  return transport_constraints(VectorXd::Ones(n), VectorXd::Ones(n));
}

// ---------------------------------------------------------------------------
// Gromov-Wasserstein coupling objective between two weighted graphs given by
// symmetric matrices da (mr x mr) and db (nc x nc):
//
//   phi(X) = (mu' (da o da) mu + nu' (db o db) nu) / 2 - <X, da X db>
//
// with o the entrywise product. Gradient -2 da X db; the Hessian acts as
// V -> -2 da V db.

class GwObjective final : public Objective {
 public:
  GwObjective(MatrixXd da, MatrixXd db, VectorXd mu, VectorXd nu)
      : da_(std::move(da)), db_(std::move(db)), mu_(std::move(mu)), nu_(std::move(nu)) {
    if (da_.rows() != da_.cols() || db_.rows() != db_.cols())
      throw DimensionMismatch("graph matrices must be square");
    if (mu_.size() != da_.rows() || nu_.size() != db_.rows())
      throw DimensionMismatch("marginal sizes do not match the graphs");
    da_ = ((da_ + da_.transpose()) / 2.0).eval();
    db_ = ((db_ + db_.transpose()) / 2.0).eval();
    const_term_ = (mu_.dot(da_.cwiseProduct(da_) * mu_) +
                   nu_.dot(db_.cwiseProduct(db_) * nu_)) /
                  2.0;
  }

  Index mr() const { return da_.rows(); }
  Index nc() const { return db_.rows(); }
  Index dim() const { return mr() * nc(); }
  bool has_hessian() const override { return true; }

  double value(const VectorXd& x) const override {
    const auto xm = as_matrix(x);
    return const_term_ - (xm.cwiseProduct(da_ * xm * db_)).sum();
  }

  VectorXd gradient(const VectorXd& x) const override {
    const auto xm = as_matrix(x);
    const MatrixXd g = -2.0 * (da_ * xm * db_);
    return Eigen::Map<const VectorXd>(g.data(), g.size());
  }

  VectorXd hessian_vec(const VectorXd&, const VectorXd& v) const override {
    const auto vm = as_matrix(v);
    const MatrixXd h = -2.0 * (da_ * vm * db_);
    return Eigen::Map<const VectorXd>(h.data(), h.size());
  }

  const MatrixXd& da() const { return da_; }
  const MatrixXd& db() const { return db_; }
  const VectorXd& mu() const { return mu_; }
  const VectorXd& nu() const { return nu_; }

 private:
  Eigen::Map<const MatrixXd> as_matrix(const VectorXd& x) const {
    if (x.size() != dim()) throw DimensionMismatch("coupling vector has wrong length");
    return {x.data(), mr(), nc()};
  }

  MatrixXd da_, db_;
  VectorXd mu_, nu_;
  double const_term_ = 0.0;
};

// ---------------------------------------------------------------------------
// Barycenter objective: couplings X_1, ..., X_k (m x n_i each, stacked
// column-major into one vector) between an unknown center with marginal mu
// and k graphs (C_i, nu_i) with weights lam_i summing to one. With
// S = sum_i lam_i X_i C_i X_i' and R_ab = 1 / (mu_a mu_b):
//
//   phi(X) = sum_i lam_i nu_i' (C_i o C_i) nu_i / 2 - <S o S, R> / 2
//
// Gradient block i: -2 lam_i (S o R) X_i C_i.

class GwbcObjective final : public Objective {
 public:
  GwbcObjective(std::vector<MatrixXd> cs, std::vector<VectorXd> nus, VectorXd lam,
                VectorXd mu)
      : cs_(std::move(cs)), nus_(std::move(nus)), lam_(std::move(lam)), mu_(std::move(mu)) {
    const std::size_t k = cs_.size();
    if (k == 0 || nus_.size() != k || static_cast<std::size_t>(lam_.size()) != k)
      throw DimensionMismatch("barycenter pieces are inconsistent");
    if (mu_.minCoeff() <= 0.0)
      throw NegativeInput("center marginal must be strictly positive");
    offsets_.resize(k + 1, 0);
    const_term_ = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      MatrixXd& c = cs_[i];
      if (c.rows() != c.cols()) throw DimensionMismatch("graph matrices must be square");
      if (nus_[i].size() != c.rows())
        throw DimensionMismatch("marginal sizes do not match the graphs");
      c = ((c + c.transpose()) / 2.0).eval();
      offsets_[i + 1] = offsets_[i] + mu_.size() * c.rows();
      const_term_ += lam_[static_cast<Index>(i)] *
                     nus_[i].dot(c.cwiseProduct(c) * nus_[i]) / 2.0;
    }
    r_ = (mu_ * mu_.transpose()).cwiseInverse();
  }

  Index pieces() const { return static_cast<Index>(cs_.size()); }
  Index center_size() const { return mu_.size(); }
  Index piece_cols(Index i) const { return cs_[static_cast<std::size_t>(i)].rows(); }
  Index piece_offset(Index i) const { return offsets_[static_cast<std::size_t>(i)]; }
  Index dim() const { return offsets_.back(); }
  bool has_hessian() const override { return true; }

  double value(const VectorXd& x) const override {
    const MatrixXd s = assemble_s(x);
    return const_term_ - 0.5 * (s.cwiseProduct(s).cwiseProduct(r_)).sum();
  }

  VectorXd gradient(const VectorXd& x) const override {
    const MatrixXd sr = assemble_s(x).cwiseProduct(r_);
    VectorXd g(dim());
    for (Index i = 0; i < pieces(); ++i) {
      const MatrixXd gi = -2.0 * lam_[i] * (sr * block(x, i) * cs_[static_cast<std::size_t>(i)]);
      g.segment(piece_offset(i), gi.size()) = Eigen::Map<const VectorXd>(gi.data(), gi.size());
    }
    return g;
  }

  VectorXd hessian_vec(const VectorXd& x, const VectorXd& v) const override {
    if (v.size() != dim()) throw DimensionMismatch("direction vector has wrong length");
    const MatrixXd s = assemble_s(x);
    MatrixXd ds = MatrixXd::Zero(center_size(), center_size());
    for (Index i = 0; i < pieces(); ++i) {
      const auto& c = cs_[static_cast<std::size_t>(i)];
      const MatrixXd xc = block(x, i) * c;
      const auto vi = block(v, i);
      const MatrixXd t = vi * xc.transpose();
      ds += lam_[i] * (t + t.transpose());
    }
    const MatrixXd sr = s.cwiseProduct(r_);
    const MatrixXd dsr = ds.cwiseProduct(r_);
    VectorXd out(dim());
    for (Index i = 0; i < pieces(); ++i) {
      const auto& c = cs_[static_cast<std::size_t>(i)];
      const MatrixXd hi = -2.0 * lam_[i] * (dsr * block(x, i) * c + sr * block(v, i) * c);
      out.segment(piece_offset(i), hi.size()) = Eigen::Map<const VectorXd>(hi.data(), hi.size());
    }
    return out;
  }

  const std::vector<MatrixXd>& cs() const { return cs_; }
  const std::vector<VectorXd>& nus() const { return nus_; }
  const VectorXd& lam() const { return lam_; }
  const VectorXd& mu() const { return mu_; }

 private:
  Eigen::Map<const MatrixXd> block(const VectorXd& x, Index i) const {
    return {x.data() + piece_offset(i), center_size(), piece_cols(i)};
  }

  MatrixXd assemble_s(const VectorXd& x) const {
    if (x.size() != dim()) throw DimensionMismatch("stacked vector has wrong length");
    MatrixXd s = MatrixXd::Zero(center_size(), center_size());
    for (Index i = 0; i < pieces(); ++i) {
      const auto& c = cs_[static_cast<std::size_t>(i)];
      const MatrixXd xc = block(x, i) * c;
      s += lam_[i] * (xc * block(x, i).transpose());
    }
    return ((s + s.transpose()) / 2.0).eval();
  }

  std::vector<MatrixXd> cs_;
  std::vector<VectorXd> nus_;
  VectorXd lam_, mu_;
  MatrixXd r_;
  std::vector<Index> offsets_;
  double const_term_ = 0.0;
};

// ---------------------------------------------------------------------------
// Random convex QP with a prescribed spectrum spread and a known interior
// optimum direction. Draw order is part of the definition so instances are
// reproducible across builds:
//   1. n eigenvalues exp(U(log kappa, 0)), so the spectrum lies in [1, kappa]
//      and the condition target is kappa;
//   2. a standard normal n x n matrix, symmetrized, whose eigenvectors form
//      the orthogonal frame;
//   3. x1 standard normal, c = -Q x1;
//   4. A with U(0,1) entries (column-major), x2 with U(0,1) entries, b = A x2.

inline ProblemLCP gen_random_cqp(Index n, Index m, double kappa, std::uint64_t seed) {
  if (n <= 0 || m <= 0 || m >= n) throw DimensionMismatch("need 0 < m < n");
  // The spectrum spans [min(kappa,1), max(kappa,1)]; either side of 1 works.
  if (!(kappa > 0.0)) throw Error("condition target must be positive");
  Rng rng(seed);

  VectorXd eigs(n);
  const double lk = std::log(kappa);
  for (Index i = 0; i < n; ++i) eigs[i] = std::exp(rng.uniform(lk, 0.0));

  MatrixXd s = rng.normal_mat(n, n);
  s = ((s + s.transpose()) / 2.0).eval();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(s);
  const MatrixXd& pmat = es.eigenvectors();
  MatrixXd q = pmat * eigs.asDiagonal() * pmat.transpose();
  q = ((q + q.transpose()) / 2.0).eval();

  const VectorXd x1 = rng.normal_vec(n);
  const VectorXd c = -(q * x1);

  const MatrixXd a = rng.uniform_mat(m, n);
  const VectorXd x2 = rng.uniform_vec(n);
  const VectorXd b = a * x2;

  char name[96];
  std::snprintf(name, sizeof(name), "cqp_n%lld_m%lld_k%g_s%llu",
                static_cast<long long>(n), static_cast<long long>(m), kappa,
                static_cast<unsigned long long>(seed));
  return ProblemLCP(MatrixHandle(a), b,
                    std::make_shared<ObjectiveCQP>(std::move(q), std::move(c)), name);
}

// Projection of a seeded normal draw onto the standard simplex, as a QP.
inline ProblemLCP gen_simplex_projection(Index n, std::uint64_t seed) {
  Rng rng(seed);
  const VectorXd v = rng.normal_vec(n);
  SparseMat q(n, n);
  q.setIdentity();
  char name[64];
  std::snprintf(name, sizeof(name), "simplex_n%lld_s%llu", static_cast<long long>(n),
                static_cast<unsigned long long>(seed));
  return ProblemLCP(MatrixHandle(SparseMat(MatrixXd::Ones(1, n).sparseView())),
                    VectorXd::Ones(1),
                    std::make_shared<ObjectiveCQP>(std::move(q), (-v).eval()), name);
}

// ---------------------------------------------------------------------------
// Weighted k-NN style random graphs. Each vertex selects Poisson(0.1 n)
// distinct neighbors (partial Fisher-Yates over the other vertices) and each
// selected edge gets weight Poisson(10); edges are undirected, later draws
// overwrite earlier ones on the same pair. The target graph copies the source
// and appends ceil(noise * n) fresh vertices and ceil(noise * |E|) extra
// edges with uniformly random endpoints and the same weight law.

struct KnnGraphPair {
  MatrixXd source;
  MatrixXd target;
  Index source_edges = 0;
};

inline KnnGraphPair gen_knn_graph(Index n, double noise, std::uint64_t seed) {
  if (n < 2) throw DimensionMismatch("need at least two vertices");
  if (noise < 0.0) throw NegativeInput("noise fraction must be nonnegative");
  Rng rng(seed);
  KnnGraphPair out;
  out.source = MatrixXd::Zero(n, n);

  std::vector<Index> cand(static_cast<std::size_t>(n - 1));
  for (Index v = 0; v < n; ++v) {
    Index kdeg = static_cast<Index>(rng.poisson(0.1 * static_cast<double>(n)));
    kdeg = std::min(kdeg, n - 1);
    for (Index i = 0, w = 0; w < n; ++w)
      if (w != v) cand[static_cast<std::size_t>(i++)] = w;
    for (Index t = 0; t < kdeg; ++t) {
      const Index j = t + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n - 1 - t)));
      std::swap(cand[static_cast<std::size_t>(t)], cand[static_cast<std::size_t>(j)]);
      const Index u = cand[static_cast<std::size_t>(t)];
      const double w = static_cast<double>(rng.poisson(10.0));
      out.source(v, u) = w;
      out.source(u, v) = w;
    }
  }
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if (out.source(i, j) != 0.0) ++out.source_edges;

  const Index extra_v = static_cast<Index>(std::ceil(noise * static_cast<double>(n)));
  const Index extra_e =
      static_cast<Index>(std::ceil(noise * static_cast<double>(out.source_edges)));
  const Index nt = n + extra_v;
  out.target = MatrixXd::Zero(nt, nt);
  out.target.topLeftCorner(n, n) = out.source;
  for (Index e = 0; e < extra_e; ++e) {
    const Index u = static_cast<Index>(rng.below(static_cast<std::uint64_t>(nt)));
    Index v = static_cast<Index>(rng.below(static_cast<std::uint64_t>(nt - 1)));
    if (v >= u) ++v;
    const double w = static_cast<double>(rng.poisson(10.0));
    out.target(u, v) = w;
    out.target(v, u) = w;
  }
  return out;
}

// Coupling problem between two weighted graphs with uniform marginals.
inline ProblemLCP make_gw_problem(const MatrixXd& da, const MatrixXd& db,
                                  const std::string& name) {
  const Index mr = da.rows(), nc = db.rows();
  const VectorXd mu = VectorXd::Constant(mr, 1.0 / static_cast<double>(mr));
  const VectorXd nu = VectorXd::Constant(nc, 1.0 / static_cast<double>(nc));
  auto [a, b] = transport_constraints(mu, nu);
  return ProblemLCP(MatrixHandle(std::move(a)), std::move(b),
                    std::make_shared<GwObjective>(da, db, mu, nu), name);
}

inline ProblemLCP gen_gw_instance(Index n, double noise, std::uint64_t seed) {
  const KnnGraphPair g = gen_knn_graph(n, noise, seed);
  char name[96];
  std::snprintf(name, sizeof(name), "gw_n%lld_p%g_s%llu", static_cast<long long>(n), noise,
                static_cast<unsigned long long>(seed));
  return make_gw_problem(g.source, g.target, name);
}

// Barycenter problem: one unknown center of size nc coupled to k graphs.
inline ProblemLCP make_gwbc_problem(std::vector<MatrixXd> cs, VectorXd lam, Index nc,
                                    const std::string& name) {
  const std::size_t k = cs.size();
  if (k == 0 || static_cast<std::size_t>(lam.size()) != k)
    throw DimensionMismatch("barycenter pieces are inconsistent");
  const VectorXd mu = VectorXd::Constant(nc, 1.0 / static_cast<double>(nc));
  std::vector<VectorXd> nus;
  nus.reserve(k);
  std::vector<Eigen::Triplet<double>> trip;
  Index row0 = 0, col0 = 0, rows = 0, cols = 0;
  std::vector<VectorXd> bs;
  for (std::size_t i = 0; i < k; ++i) {
    const Index ni = cs[i].rows();
    nus.push_back(VectorXd::Constant(ni, 1.0 / static_cast<double>(ni)));
    rows += nc + ni - 1;
    cols += nc * ni;
  }
  SparseMat a(rows, cols);
  VectorXd b(rows);
  for (std::size_t i = 0; i < k; ++i) {
    auto [ai, bi] = transport_constraints(mu, nus[i]);
    for (Index j = 0; j < ai.outerSize(); ++j)
      for (SparseMat::InnerIterator it(ai, j); it; ++it)
        trip.emplace_back(row0 + it.row(), col0 + it.col(), it.value());
    b.segment(row0, bi.size()) = bi;
    row0 += ai.rows();
    col0 += ai.cols();
  }
  a.setFromTriplets(trip.begin(), trip.end());
  return ProblemLCP(MatrixHandle(std::move(a)), std::move(b),
                    std::make_shared<GwbcObjective>(std::move(cs), std::move(nus),
                                                    std::move(lam), mu),
                    name);
}

inline ProblemLCP gen_gwbc_instance(Index n, Index k, double noise, std::uint64_t seed) {
  if (k < 1) throw DimensionMismatch("need at least one graph");
  std::vector<MatrixXd> cs;
  cs.reserve(static_cast<std::size_t>(k));
  for (Index i = 0; i < k; ++i)
    cs.push_back(gen_knn_graph(n, noise, seed + static_cast<std::uint64_t>(i)).target);
  const VectorXd lam = VectorXd::Constant(k, 1.0 / static_cast<double>(k));
  char name[96];
  std::snprintf(name, sizeof(name), "gwbc_n%lld_k%lld_p%g_s%llu", static_cast<long long>(n),
                static_cast<long long>(k), noise, static_cast<unsigned long long>(seed));
  return make_gwbc_problem(std::move(cs), lam, n, name);
}

}  // namespace hadopt
