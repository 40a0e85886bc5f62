#pragma once

#include <stdexcept>
#include <string>

namespace patchmg {

/// Base class for all solver errors.  CLI maps subclasses to exit codes.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad user input: out-of-range parameters, malformed files, impossible rank counts.
struct ConfigError : Error {
  using Error::Error;
};

/// Argument outside the parameter domain or incompatible object shapes.
struct DomainError : Error {
  using Error::Error;
};

/// Patch sides overlap without matching, or discretizations disagree across an interface.
struct NonMatchingError : Error {
  using Error::Error;
};

/// A patch side matches more than one partner side.
struct NonManifoldError : Error {
  using Error::Error;
};

/// |det J| fell below tolerance at a quadrature or sample point.
struct SingularGeometryError : Error {
  using Error::Error;
};

/// A matrix factorization or eigendecomposition failed (not SPD, not PSD).
struct DecompositionError : Error {
  using Error::Error;
};

/// A smoother block turned out not positive definite.
struct DefinitenessError : Error {
  using Error::Error;
};

/// Iterative solver hit the iteration cap before reaching tolerance.
struct DivergenceError : Error {
  using Error::Error;
};

/// Message transport between ranks failed (peer died, malformed payload).
struct TransportError : Error {
  using Error::Error;
};

}  // namespace patchmg
