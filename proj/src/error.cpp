#include "hrmix/error.hpp"

namespace hrmix {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Domain: return "domain";
    case ErrorKind::InsufficientData: return "insufficient-data";
    case ErrorKind::Optimization: return "optimization";
    case ErrorKind::InvalidVariogram: return "invalid-variogram";
    case ErrorKind::Connectivity: return "connectivity";
    case ErrorKind::Singular: return "singular";
    case ErrorKind::Size: return "size";
    case ErrorKind::Config: return "config";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Integrity: return "integrity";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::DegeneratePrior: return "degenerate-prior";
    case ErrorKind::SamplerDegeneracy: return "sampler-degeneracy";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

bool Error::is_validation() const noexcept {
  switch (kind_) {
    case ErrorKind::Config:
    case ErrorKind::Parse:
    case ErrorKind::Integrity:
    case ErrorKind::Validation:
      return true;
    default:
      return false;
  }
}

}  // namespace hrmix
