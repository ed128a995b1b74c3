// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hbvla/matrix.hpp"

namespace hbvla {

enum class Band : std::uint8_t { lo = 0, hi = 1, leftover = 2 };

/// Coefficients of one binarization group, as indices into a band sequence.
struct GroupSpec {
  Band band = Band::lo;
  std::size_t row = 0;
  std::vector<std::size_t> members;  // strictly increasing
  bool shared_mean = false;
};

/// Dequantized member j is mu + alpha * (signs[j] ? +1 : -1).
struct GroupQuantParams {
  double mu = 0.0;
  double alpha = 0.0;
  std::vector<std::uint8_t> signs;  // 1 = positive

  double value(std::size_t j) const noexcept { return signs[j] ? mu + alpha : mu - alpha; }
};

/// How group metadata is stored. half: mu and alpha are rounded to IEEE
/// binary16 before use, so the in-memory result equals what a decoder sees.
enum class MetaPrecision { f64, half };

/// mu = mean(u) (or the override), signs = sign(u - mu) with sign(0) = +1,
/// alpha = mean|u - mu|.
GroupQuantParams quantize_group(std::span<const double> u,
                                std::optional<double> mu_override = std::nullopt,
                                MetaPrecision meta = MetaPrecision::f64);

/// Squared reconstruction error of `u` under `p`.
double group_error(std::span<const double> u, const GroupQuantParams& p);

/// Dense/sparse split of one window. With max_groups == 2 the coefficients are
/// ranked by |u - centre| (centre = mean(u) or the override) and every
/// break-point between the low-deviation (dense) and high-deviation (sparse)
/// sets is evaluated; the best strictly-improving split is returned as
/// {dense, sparse}, otherwise a single group. Member indices are relative to u.
std::vector<GroupSpec> split_band(std::span<const double> u, std::size_t max_groups,
                                  std::optional<double> mu_override = std::nullopt);

/// Squared error of quantizing `u` with the given grouping.
double grouping_error(std::span<const double> u, const std::vector<GroupSpec>& groups,
                      std::optional<double> mu_override = std::nullopt);

/// Result of the shared-mean band quantizer for a rows x len band slice.
struct SharedMeanBand {
  std::vector<double> row_mu;                            // one per row
  std::vector<std::vector<GroupSpec>> groups;            // per row
  std::vector<std::vector<GroupQuantParams>> params;     // per row, aligned with groups
};

/// Quantizes each row with a single mean shared by all of its groups, using
/// caller-supplied groups (indices relative to the row).
SharedMeanBand quantize_band_shared_mean(const Matrix& band,
                                         const std::vector<std::vector<GroupSpec>>& groups,
                                         MetaPrecision meta = MetaPrecision::f64);

/// Same, with groups found per `window`-wide slice by split_band centred on
/// the shared row mean.
SharedMeanBand quantize_band_shared_mean(const Matrix& band, std::size_t window,
                                         std::size_t max_groups,
                                         MetaPrecision meta = MetaPrecision::f64);

/// Rebuilds a length-`len` sequence from groups and their parameters.
std::vector<double> dequantize_band(const std::vector<GroupSpec>& specs,
                                    const std::vector<GroupQuantParams>& params,
                                    std::size_t len);

Matrix dequantize_band(const SharedMeanBand& band, std::size_t len);

}  // namespace hbvla
