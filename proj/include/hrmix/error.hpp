#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace hrmix {

enum class ErrorKind {
  Domain,            // argument outside the mathematical domain
  InsufficientData,  // too few exceedances / observations
  Optimization,      // optimizer failed to converge
  InvalidVariogram,  // Sigma^(k) not strictly positive definite
  Connectivity,      // disconnected site set
  Singular,          // Laplacian minor numerically singular
  Size,              // input too large for an exhaustive routine
  Config,            // missing or inconsistent configuration
  Parse,             // malformed input file
  Integrity,         // duplicate keys and similar data-integrity failures
  Validation,        // value out of documented bounds
  DegeneratePrior,   // every tree has zero prior mass
  SamplerDegeneracy, // rejection sampler acceptance collapsed
  Io,
};

const char* to_string(ErrorKind kind) noexcept;

/// Base exception for every failure raised by the library. The kind drives
/// the CLI exit code: validation-type kinds map to 2, everything else to 1.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// True for errors caused by bad user input rather than numerical failure.
  bool is_validation() const noexcept;

 private:
  ErrorKind kind_;
};

/// Carries the last iterate of a failed optimization.
class OptimizationError : public Error {
 public:
  OptimizationError(const std::string& what, std::vector<double> last_iterate)
      : Error(ErrorKind::Optimization, what), last_(std::move(last_iterate)) {}
  const std::vector<double>& last_iterate() const noexcept { return last_; }

 private:
  std::vector<double> last_;
};

}  // namespace hrmix
