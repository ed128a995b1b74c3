// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "hbvla/matrix.hpp"

namespace hbvla {

/// Counter-based generator: output k of stream `seed` is
/// splitmix64(seed ^ mix(k)), so identical seeds reproduce identical streams
/// everywhere and `split` derives independent child streams without state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) noexcept : seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64() noexcept;
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Standard normal via Box-Muller (one variate per call, no caching).
  double normal() noexcept;
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept;

  Rng split(std::uint64_t stream) const noexcept;

  Matrix normal_matrix(std::size_t rows, std::size_t cols, double scale = 1.0);

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace hbvla
