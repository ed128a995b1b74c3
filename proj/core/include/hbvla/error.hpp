// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hbvla {

enum class ErrorCode {
  dimension,
  format,
  truncation,
  degenerate_input,
  inconsistent,
  permutation,
  configuration,
  numerical,
  domain,
  size_limit,
  singular,
  io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries a category code so callers
/// (the CLI in particular) can map it onto an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace hbvla
