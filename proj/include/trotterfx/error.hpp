#pragma once

#include <stdexcept>
#include <string>

namespace trotterfx {

enum class ErrorKind {
  invalid_argument,
  not_hermitian,
  not_unitary,
  not_normalized,
  dimension_mismatch,
  cap_exceeded,
  branch_ambiguity,
  degenerate_spectrum,
  pairing_ambiguity,
  gap_collapse,
  subspace_tracking,
  quadrant_ambiguity,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid argument";
    case ErrorKind::not_hermitian: return "operator is not Hermitian";
    case ErrorKind::not_unitary: return "operator is not unitary";
    case ErrorKind::not_normalized: return "state is not normalized";
    case ErrorKind::dimension_mismatch: return "dimension mismatch";
    case ErrorKind::cap_exceeded: return "size cap exceeded";
    case ErrorKind::branch_ambiguity: return "logarithm branch ambiguity";
    case ErrorKind::degenerate_spectrum: return "degenerate spectrum";
    case ErrorKind::pairing_ambiguity: return "eigenpair matching ambiguity";
    case ErrorKind::gap_collapse: return "spectral gap collapse";
    case ErrorKind::subspace_tracking: return "subspace tracking failure";
    case ErrorKind::quadrant_ambiguity: return "phase quadrant ambiguity";
  }
  return "unknown error";
}

/// Every failure raised by the library carries a kind so callers (the CLI in
/// particular) can map it onto an exit status without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail)
      : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// True for input-validation failures, false for failures discovered
  /// during the numerics.
  bool is_usage_error() const noexcept {
    return kind_ == ErrorKind::invalid_argument || kind_ == ErrorKind::cap_exceeded ||
           kind_ == ErrorKind::dimension_mismatch;
  }

 private:
  ErrorKind kind_;
};

}  // namespace trotterfx
