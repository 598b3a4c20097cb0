#pragma once

#include <stdexcept>
#include <string>

namespace cepcca {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file (ragged rows, bad header, unparseable token).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Subject identifiers do not line up one-to-one between inputs.
class JoinError : public Error {
 public:
  using Error::Error;
};

/// A value violates a domain constraint (non-finite sample, bad design parameter).
class ValueError : public Error {
 public:
  using Error::Error;
};

/// Outcome column with zero sample variance cannot be standardized.
class DegenerateColumnError : public Error {
 public:
  using Error::Error;
};

/// Cepstral truncation order outside [1, floor((T-1)/2)].
class OrderError : public Error {
 public:
  using Error::Error;
};

/// Cosine design lost full column rank.
class DesignRankError : public Error {
 public:
  using Error::Error;
};

/// Outcome covariance numerically singular.
class SingularOutcomeError : public Error {
 public:
  using Error::Error;
};

/// Matrix argument violates a structural requirement (symmetry, positive definiteness).
class MatrixError : public Error {
 public:
  using Error::Error;
};

/// No canonical pair is identified (rank of the cepstral covariance is zero).
class DegenerateCcaError : public Error {
 public:
  using Error::Error;
};

/// Array shapes disagree with the operation's contract.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Iterative procedure failed to produce a usable result.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Simulation run exceeded the tolerated replicate failure rate.
class SimulationError : public Error {
 public:
  using Error::Error;
};

}  // namespace cepcca
