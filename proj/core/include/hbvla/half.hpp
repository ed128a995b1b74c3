// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

namespace hbvla {

/// IEEE 754 binary16, round-to-nearest-even directly from double.
/// Throws ErrorCode::numerical when |x| exceeds the half range (65504).
std::uint16_t to_half_bits(double x);
double from_half_bits(std::uint16_t bits) noexcept;

inline double round_to_half(double x) { return from_half_bits(to_half_bits(x)); }

}  // namespace hbvla
