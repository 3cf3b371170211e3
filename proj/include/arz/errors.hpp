#pragma once

#include <stdexcept>
#include <string>

namespace arz {

// Error classes map onto distinct CLI exit codes (see tools/arzctl.cpp).

/// Invalid user-facing configuration: bad parameter, regime violation, unknown key.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Mismatched array lengths or layer dimensions.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical failure: CFL violation, lost invariant, divergence.
class NumericsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Model or dataset file could not be read, written, or validated.
class ModelIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace arz
