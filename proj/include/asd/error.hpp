// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace asd {

enum class ErrorCode {
  io,
  format,
  unsupported_codec,
  truncated,
  sample_rate_mismatch,
  shape,
  config,
  domain,
  insufficient_data,
  degenerate_labels,
  undefined_auc,
  normalization,
  corruption,
  unknown_kind,
  numeric,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::io: return "io";
    case ErrorCode::format: return "format";
    case ErrorCode::unsupported_codec: return "unsupported_codec";
    case ErrorCode::truncated: return "truncated";
    case ErrorCode::sample_rate_mismatch: return "sample_rate_mismatch";
    case ErrorCode::shape: return "shape";
    case ErrorCode::config: return "config";
    case ErrorCode::domain: return "domain";
    case ErrorCode::insufficient_data: return "insufficient_data";
    case ErrorCode::degenerate_labels: return "degenerate_labels";
    case ErrorCode::undefined_auc: return "undefined_auc";
    case ErrorCode::normalization: return "normalization";
    case ErrorCode::corruption: return "corruption";
    case ErrorCode::unknown_kind: return "unknown_kind";
    case ErrorCode::numeric: return "numeric";
  }
  return "unknown";
}

/// Process exit status for an error: 1 usage/config, 2 input format, 3 numeric failure.
inline int exit_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::config:
    case ErrorCode::unknown_kind:
      return 1;
    case ErrorCode::io:
    case ErrorCode::format:
    case ErrorCode::unsupported_codec:
    case ErrorCode::truncated:
    case ErrorCode::sample_rate_mismatch:
    case ErrorCode::shape:
    case ErrorCode::corruption:
      return 2;
    default:
      return 3;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace asd
