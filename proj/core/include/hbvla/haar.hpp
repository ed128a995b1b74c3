// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>

#include "hbvla/matrix.hpp"
#include "hbvla/permute.hpp"

namespace hbvla {

enum class Axis { rows, cols };

/// average:      analysis kernels [1/2, 1/2] and [1/2, -1/2], synthesis +-1.
/// orthonormal:  1/sqrt(2) in both directions (norm preserving).
enum class HaarNorm { average, orthonormal };

/// One-level Haar subbands along one axis.
///
/// Axis::rows transforms each row (pairs adjacent columns): lo/hi are
/// rows x floor(len/2) and an odd trailing column is kept in `leftover`
/// (rows x 1). Axis::cols is the transposed arrangement: lo/hi are
/// floor(len/2) x cols and `leftover` is the trailing 1 x cols row.
struct HaarBands {
  Matrix lo;
  Matrix hi;
  std::optional<Matrix> leftover;
  Axis axis = Axis::rows;
  std::size_t original_len = 0;
  HaarNorm norm = HaarNorm::average;
};

HaarBands haar_forward_rows(const Matrix& w, HaarNorm norm = HaarNorm::average);
Matrix haar_inverse_rows(const HaarBands& b);

HaarBands haar_forward_cols(const Matrix& w, HaarNorm norm = HaarNorm::average);
Matrix haar_inverse_cols(const HaarBands& b);

/// 1/4 * sum_k ||w(:, pi(2k)) - w(:, pi(2k+1))||^2, the squared Frobenius norm
/// of the one-level high-pass band of w P (average normalization).
double highpass_energy(const Matrix& w, const ColumnOrdering& ordering);

/// Same quantity computed by actually permuting and transforming.
double highpass_energy_via_transform(const Matrix& w, const ColumnOrdering& ordering);

}  // namespace hbvla
