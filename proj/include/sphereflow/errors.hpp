#pragma once

#include <stdexcept>
#include <string>

namespace sphereflow {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user-supplied configuration (bad grid size, unknown key, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Caller broke an operation's precondition (mismatched grids, too few slices).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure during time stepping: CFL refusal, NaN input, blow-up.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class CflError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// The projected step met a pre-projection vector of near-zero length.
class ProjectionSingularity : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ChartDomainError : public Error {
 public:
  using Error::Error;
};

class KernelDomainError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace sphereflow
