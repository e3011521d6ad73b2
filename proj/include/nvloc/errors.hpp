#ifndef NVLOC_ERRORS_HPP
#define NVLOC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace nvloc {

enum class ErrorKind {
  validation,
  singular_point,
  numerical,
  under_resolved,
  fit_failure,
  ambiguous_branches,
  insufficient_data,
  no_oscillation,
  inconsistent_inputs,
  no_consistent_position,
  out_of_range,
  unstable_inversion,
  io,
  parse,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation: return "validation";
    case ErrorKind::singular_point: return "singular_point";
    case ErrorKind::numerical: return "numerical";
    case ErrorKind::under_resolved: return "under_resolved";
    case ErrorKind::fit_failure: return "fit_failure";
    case ErrorKind::ambiguous_branches: return "ambiguous_branches";
    case ErrorKind::insufficient_data: return "insufficient_data";
    case ErrorKind::no_oscillation: return "no_oscillation";
    case ErrorKind::inconsistent_inputs: return "inconsistent_inputs";
    case ErrorKind::no_consistent_position: return "no_consistent_position";
    case ErrorKind::out_of_range: return "out_of_range";
    case ErrorKind::unstable_inversion: return "unstable_inversion";
    case ErrorKind::io: return "io";
    case ErrorKind::parse: return "parse";
  }
  return "unknown";
}

/// Library-wide exception. The kind drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Exit codes: 0 success, 1 fit failure, 2 I/O, 3 inversion instability, 4 validation.
inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io:
    case ErrorKind::parse:
      return 2;
    case ErrorKind::unstable_inversion:
    case ErrorKind::no_consistent_position:
    case ErrorKind::out_of_range:
      return 3;
    case ErrorKind::validation:
    case ErrorKind::singular_point:
      return 4;
    default:
      return 1;
  }
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, const std::string& message) {
  if (!condition) fail(ErrorKind::validation, message);
}

}  // namespace nvloc

#endif  // NVLOC_ERRORS_HPP
