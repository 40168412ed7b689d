#pragma once

// Seeded random draws used by the problem generators and the solver's initial
// point. std::mt19937_64 is bit-specified by the standard; the distribution
// transforms are hand-rolled because std::normal_distribution and friends are
// implementation-defined and would break cross-toolchain reproducibility.
//
// Stream accounting (so generators can document their draw order):
//   uniform01       consumes 1 engine word
//   normal          consumes 2 words on the first of each pair, 0 on the second
//   poisson(lam)    consumes a data-dependent number of words

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <random>

namespace hadopt {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Box-Muller; the second variate of each pair is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    constexpr double two_pi = 6.283185307179586476925286766559;
    spare_ = r * std::sin(two_pi * u2);
    have_spare_ = true;
    return r * std::cos(two_pi * u2);
  }

  // Exact Poisson via additivity: split the mean into chunks small enough for
  // Knuth's product method (sum of independent Poissons is Poisson).
  int poisson(double lambda) {
    int total = 0;
    while (lambda > 16.0) {
      total += poisson_knuth(16.0);
      lambda -= 16.0;
    }
    return total + poisson_knuth(lambda);
  }

  // Uniform integer in [0, n). Unbiased via rejection on the top range.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v = gen_();
    while (v >= limit) v = gen_();
    return v % n;
  }

  Eigen::VectorXd normal_vec(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  Eigen::VectorXd uniform_vec(Eigen::Index n, double lo = 0.0, double hi = 1.0) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = uniform(lo, hi);
    return v;
  }

  Eigen::MatrixXd normal_mat(Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd a(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) a(i, j) = normal();
    return a;
  }

  Eigen::MatrixXd uniform_mat(Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd a(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) a(i, j) = uniform01();
    return a;
  }

  std::mt19937_64& engine() { return gen_; }

 private:
  int poisson_knuth(double lambda) {
    if (lambda <= 0.0) return 0;
    const double limit = std::exp(-lambda);
    int k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform01();
    } while (p > limit);
    return k - 1;
  }

  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace hadopt
