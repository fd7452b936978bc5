#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mrgd {

// Root of all library errors. Everything below is distinguishable by type so
// callers (and the CLI exit-code mapping) can react to the failure class.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed inputs: shape mismatches, out-of-domain parameters, bad configs.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Symmetric eigendecomposition produced a non-positive eigenvalue.
class IndefiniteMatrixError : public Error {
 public:
  using Error::Error;
};

// A declared group boundary sits inside a cluster (no spectral gap there).
class InvalidGroupingError : public Error {
 public:
  using Error::Error;
};

// The Theorem-2 denominator is non-positive: the spectrum/rate combination is
// outside the theorem's applicability, so no feasible schedule exists.
class ScheduleInfeasibleError : public Error {
 public:
  ScheduleInfeasibleError(std::size_t i, std::size_t j, const std::string& what)
      : Error(what), group_i(i), group_j(j) {}
  std::size_t group_i = 0;
  std::size_t group_j = 0;
};

// |r_i - R^j_{i+1}| vanished: measure-zero parameter degeneracy.
class DegenerateSpectrumError : public Error {
 public:
  using Error::Error;
};

// A contraction-bound factor left [0, 1): the rate is inadmissible for the
// smallest eigenvalue.
class BoundInvalidError : public Error {
 public:
  using Error::Error;
};

// Iterate left the trust region (non-finite or norm blow-up).
class DivergenceError : public Error {
 public:
  DivergenceError(long step, const std::string& what) : Error(what), step(step) {}
  long step = 0;
};

// CG hit a zero-curvature direction.
class NumericalBreakdownError : public Error {
 public:
  using Error::Error;
};

// Singular normal matrix (typically N < d).
class RankDeficiencyError : public Error {
 public:
  using Error::Error;
};

// Zero-variance data handed to PCA.
class DegenerateDataError : public Error {
 public:
  using Error::Error;
};

// File could not be opened/read/written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace mrgd
