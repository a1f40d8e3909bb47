#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gmlm {

enum class ErrorKind {
  invalid_argument,
  invalid_state,
  data_error,
  degenerate_design,
  non_monotone_fit,
  inference_unstable,
  tuning_failed,
  degenerate_prior,
  undefined_share,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Every failure raised by the library carries a kind so that callers (the CLI
// in particular) can map it onto an exit status without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  // True for failures of the numerical pipeline as opposed to bad input.
  bool is_numerical() const noexcept {
    switch (kind_) {
      case ErrorKind::degenerate_design:
      case ErrorKind::non_monotone_fit:
      case ErrorKind::inference_unstable:
      case ErrorKind::tuning_failed:
      case ErrorKind::degenerate_prior:
      case ErrorKind::undefined_share:
        return true;
      default:
        return false;
    }
  }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) fail(kind, what);
}

inline std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::invalid_state: return "invalid-state";
    case ErrorKind::data_error: return "data-error";
    case ErrorKind::degenerate_design: return "degenerate-design";
    case ErrorKind::non_monotone_fit: return "non-monotone-fit";
    case ErrorKind::inference_unstable: return "inference-unstable";
    case ErrorKind::tuning_failed: return "tuning-failed";
    case ErrorKind::degenerate_prior: return "degenerate-prior";
    case ErrorKind::undefined_share: return "undefined-share";
  }
  return "unknown";
}

}  // namespace gmlm
