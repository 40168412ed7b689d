#pragma once

// Exception types thrown by the library. Control-flow errors that callers are
// expected to recover from (RetractionDiverged, LinesearchFailed) derive from
// the same base so a driver can catch hadopt::Error uniformly.

#include <stdexcept>
#include <string>

namespace hadopt {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Input validation ----------------------------------------------------------

struct DimensionMismatch : Error {
  using Error::Error;
};

struct NonFiniteInput : Error {
  using Error::Error;
};

// lift(x) with an entry more negative than the clip tolerance.
struct NegativeInput : Error {
  using Error::Error;
};

// Constraint matrix does not have full row rank.
struct RankDeficientA : Error {
  using Error::Error;
};

// Transport marginals whose total masses disagree.
struct MarginalMismatch : Error {
  using Error::Error;
};

// Factorization / linear systems --------------------------------------------

struct NotSymmetric : Error {
  using Error::Error;
};

// A pivot fell below the negative tolerance: the matrix is not PSD.
struct IndefiniteMatrix : Error {
  using Error::Error;
};

// Right-hand side has a component outside the range of the factored matrix.
struct InconsistentSystem : Error {
  using Error::Error;
};

// Geometry / stationarity ---------------------------------------------------

struct NotInTangentCone : Error {
  using Error::Error;
};

// Objective does not implement Hessian-vector products.
struct NoHessian : Error {
  using Error::Error;
};

// escape_direction called with a (numerically) zero witness.
struct ZeroWitness : Error {
  using Error::Error;
};

// Iterative schemes ---------------------------------------------------------

struct MaxIterExceeded : Error {
  using Error::Error;
};

struct RetractionDiverged : Error {
  using Error::Error;
};

struct LinesearchFailed : Error {
  using Error::Error;
};

// Dual iterate diverging: the subproblem is (numerically) infeasible.
struct InfeasibleDetected : Error {
  using Error::Error;
};

// Serialization -------------------------------------------------------------

struct ParseError : Error {
  using Error::Error;
};

}  // namespace hadopt
