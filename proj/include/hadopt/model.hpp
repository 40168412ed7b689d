#pragma once

// Problem data for  min phi(x)  s.t.  A x = b, x >= 0,  and the squared
// parametrization x = y.*y the solver works in. A point carries both views;
// x is always exactly the elementwise square of y.

#include <Eigen/Core>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hadopt/errors.hpp"
#include "hadopt/linalg.hpp"

namespace hadopt {

// ---------------------------------------------------------------------------
// Objective oracle.

class Objective {
 public:
  virtual ~Objective() = default;
  virtual double value(const VectorXd& x) const = 0;
  virtual VectorXd gradient(const VectorXd& x) const = 0;
  virtual bool has_hessian() const { return false; }
  virtual VectorXd hessian_vec(const VectorXd& /*x*/, const VectorXd& /*v*/) const {
    throw NoHessian("objective provides no Hessian-vector product");
  }
};

// phi(x) = x'Qx/2 + c'x with Q symmetrized on construction.
class ObjectiveCQP final : public Objective {
 public:
  ObjectiveCQP(MatrixXd q, VectorXd c)
      : q_(MatrixXd(0.5 * (q + q.transpose()))), c_(std::move(c)) {
    check_dims();
  }
  ObjectiveCQP(const SparseMat& q, VectorXd c)
      : q_(SparseMat(0.5 * (SparseMat(q.transpose()) + q))), c_(std::move(c)) {
    check_dims();
  }

  double value(const VectorXd& x) const override {
    return 0.5 * x.dot(q_.apply(x)) + c_.dot(x);
  }
  VectorXd gradient(const VectorXd& x) const override { return q_.apply(x) + c_; }
  bool has_hessian() const override { return true; }
  VectorXd hessian_vec(const VectorXd&, const VectorXd& v) const override {
    return q_.apply(v);
  }

  const MatrixHandle& q() const { return q_; }
  const VectorXd& c() const { return c_; }

 private:
  void check_dims() const {
    if (q_.rows() != q_.cols() || q_.rows() != c_.size())
      throw DimensionMismatch("ObjectiveCQP: Q/c sizes disagree");
  }
  MatrixHandle q_;
  VectorXd c_;
};

// ---------------------------------------------------------------------------
// Problem container. A must have full row rank; checked once at construction
// through the pivot count of the LDL of A A^T.

class ProblemLCP {
 public:
  ProblemLCP(MatrixHandle a, VectorXd b, std::shared_ptr<const Objective> phi,
             std::string name = "")
      : a_(std::move(a)), b_(std::move(b)), phi_(std::move(phi)), name_(std::move(name)) {
    if (a_.rows() != b_.size()) throw DimensionMismatch("ProblemLCP: A rows vs b");
    if (!phi_) throw Error("ProblemLCP: null objective");
    const LdlFactors f = a_.factor_gram(VectorXd::Ones(a_.cols()));
    if (f.rank() != a_.rows())
      throw RankDeficientA("ProblemLCP: constraint matrix rank " +
                           std::to_string(f.rank()) + " < " + std::to_string(a_.rows()));
  }

  Index n() const { return a_.cols(); }
  Index m() const { return a_.rows(); }
  const MatrixHandle& a() const { return a_; }
  const VectorXd& b() const { return b_; }
  const Objective& phi() const { return *phi_; }
  std::shared_ptr<const Objective> phi_ptr() const { return phi_; }
  const std::string& name() const { return name_; }

  double value(const VectorXd& x) const { return phi_->value(x); }
  VectorXd gradient(const VectorXd& x) const { return phi_->gradient(x); }

  double feas_residual(const VectorXd& x) const { return (a_.apply(x) - b_).norm(); }

 private:
  MatrixHandle a_;
  VectorXd b_;
  std::shared_ptr<const Objective> phi_;
  std::string name_;
};

// ---------------------------------------------------------------------------
// Points.

struct PrimalPoint {
  VectorXd y;
  VectorXd x;                   // exactly y.*y
  std::vector<Index> support;   // |y_i| above the support threshold
  std::optional<double> feas_residual;

  Index n() const { return y.size(); }
};

// supp_threshold is relative: an entry counts as support when
// |y_i| > supp_threshold * (1 + ||y||_inf).
inline PrimalPoint make_point(const VectorXd& y, double supp_threshold = 1e-12) {
  if (!y.allFinite()) throw NonFiniteInput("make_point: non-finite y");
  PrimalPoint p;
  p.y = y;
  p.x = y.cwiseProduct(y);
  const double thr =
      supp_threshold * (1.0 + (y.size() ? y.cwiseAbs().maxCoeff() : 0.0));
  for (Index i = 0; i < y.size(); ++i)
    if (std::abs(y[i]) > thr) p.support.push_back(i);
  return p;
}

inline PrimalPoint make_point(const ProblemLCP& prob, const VectorXd& y,
                              double supp_threshold = 1e-12) {
  PrimalPoint p = make_point(y, supp_threshold);
  if (p.x.size() != prob.n()) throw DimensionMismatch("make_point: y size vs problem");
  p.feas_residual = prob.feas_residual(p.x);
  return p;
}

// y = sqrt(max(x, 0)). Entries below -clip_tol are treated as genuinely
// negative input rather than roundoff and rejected.
inline VectorXd lift(const VectorXd& x, double clip_tol = 1e-12) {
  if (!x.allFinite()) throw NonFiniteInput("lift: non-finite x");
  if (x.size() && x.minCoeff() < -clip_tol)
    throw NegativeInput("lift: entry below -clip_tol");
  return x.cwiseMax(0.0).cwiseSqrt();
}

inline PrimalPoint lift_point(const VectorXd& x, double clip_tol = 1e-12,
                              double supp_threshold = 1e-12) {
  return make_point(lift(x, clip_tol), supp_threshold);
}

inline PrimalPoint lift_point(const ProblemLCP& prob, const VectorXd& x,
                              double clip_tol = 1e-12, double supp_threshold = 1e-12) {
  return make_point(prob, lift(x, clip_tol), supp_threshold);
}

}  // namespace hadopt
