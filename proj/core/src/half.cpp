// SPDX-License-Identifier: Apache-2.0
#include "hbvla/half.hpp"

#include <cmath>
#include <string>

#include "hbvla/error.hpp"

namespace hbvla {

std::uint16_t to_half_bits(double x) {
  if (!std::isfinite(x)) fail(ErrorCode::numerical, "binary16: non-finite value");
  const std::uint16_t sign = std::signbit(x) ? 0x8000 : 0;
  const double a = std::abs(x);
  if (a == 0.0) return sign;

  int e;
  std::frexp(a, &e);  // a = f * 2^e, f in [0.5, 1)
  int exp = e - 1;    // a in [2^exp, 2^(exp+1))
  if (exp < -14) {
    // Subnormal: multiples of 2^-24. Rounds to nearest even via nearbyint.
    const double q = std::nearbyint(std::ldexp(a, 24));
    if (q >= 1024.0) return static_cast<std::uint16_t>(sign | (1u << 10));  // smallest normal
    return static_cast<std::uint16_t>(sign | static_cast<std::uint16_t>(q));
  }
  double q = std::nearbyint(std::ldexp(a, 10 - exp));  // in [1024, 2048]
  if (q == 2048.0) {
    q = 1024.0;
    ++exp;
  }
  if (exp > 15) fail(ErrorCode::numerical, "binary16: magnitude " + std::to_string(x) + " out of range");
  const auto mant = static_cast<std::uint16_t>(static_cast<unsigned>(q) - 1024u);
  return static_cast<std::uint16_t>(sign | ((exp + 15) << 10) | mant);
}

double from_half_bits(std::uint16_t bits) noexcept {
  const bool neg = bits & 0x8000;
  const int exp = (bits >> 10) & 0x1F;
  const int mant = bits & 0x3FF;
  double v;
  if (exp == 0) {
    v = std::ldexp(static_cast<double>(mant), -24);
  } else if (exp == 31) {
    v = mant ? std::nan("") : INFINITY;
  } else {
    v = std::ldexp(static_cast<double>(mant + 1024), exp - 25);
  }
  return neg ? -v : v;
}

}  // namespace hbvla
