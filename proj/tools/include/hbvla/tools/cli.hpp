// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "hbvla/error.hpp"

namespace hbvla::tools {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitInput = 3;
inline constexpr int kExitNumerical = 4;

int exit_code_for(ErrorCode code) noexcept;

/// args[0] is the program name. Failures print one line to `err`:
///   hbvla-error exit=<n> code=<category> message="<text>"
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hbvla::tools
