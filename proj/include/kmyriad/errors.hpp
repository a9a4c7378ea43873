#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace kmyriad {

// Base for everything thrown by this library.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape/extent mismatch between operands.
struct DimensionError : Error {
  using Error::Error;
};

// Input outside the mathematical domain of an operation (log of non-positive,
// digamma of non-positive, non-finite action, ...).
struct DomainError : Error {
  using Error::Error;
};

// Caller violated a documented precondition (k >= N, non-scalar backward root,
// reused tape, head index out of range, ...).
struct ContractError : Error {
  using Error::Error;
};

// A k-th neighbor distance of exactly zero where the estimator is undefined.
// Carries the offending particle indices.
struct DegenerateRadiusError : Error {
  std::vector<int> indices;
  DegenerateRadiusError(const std::string& msg, std::vector<int> idx)
      : Error(msg), indices(std::move(idx)) {}
};

// Non-finite value produced where finiteness is an invariant.
struct NumericError : Error {
  using Error::Error;
};

// Action on or outside the squashed-action boundary (atanh singularity).
struct BoundaryError : Error {
  using Error::Error;
};

// Bad run configuration (unknown key, unparsable value, ...).
struct ConfigError : Error {
  using Error::Error;
};

// Filesystem/serialization failure, including checkpoint corruption.
struct IoError : Error {
  using Error::Error;
};

}  // namespace kmyriad
