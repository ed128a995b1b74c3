// SPDX-License-Identifier: Apache-2.0
#include "hbvla/haar.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace hbvla {

namespace {

struct Kernel {
  double analysis;
  double synthesis;
};

Kernel kernel(HaarNorm norm) {
  if (norm == HaarNorm::orthonormal) {
    return {1.0 / std::numbers::sqrt2, 1.0 / std::numbers::sqrt2};
  }
  return {0.5, 1.0};
}

}  // namespace

HaarBands haar_forward_rows(const Matrix& w, HaarNorm norm) {
  const std::size_t len = w.cols();
  if (len < 2) fail(ErrorCode::degenerate_input, "haar_forward_rows: need at least 2 columns");
  const std::size_t half = len / 2;
  const double k = kernel(norm).analysis;

  HaarBands b;
  b.axis = Axis::rows;
  b.original_len = len;
  b.norm = norm;
  b.lo = Matrix(w.rows(), half);
  b.hi = Matrix(w.rows(), half);
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const auto in = w.row(r);
    auto lo = b.lo.row(r);
    auto hi = b.hi.row(r);
    for (std::size_t j = 0; j < half; ++j) {
      lo[j] = k * (in[2 * j] + in[2 * j + 1]);
      hi[j] = k * (in[2 * j] - in[2 * j + 1]);
    }
  }
  if (len % 2 == 1) {
    Matrix left(w.rows(), 1);
    for (std::size_t r = 0; r < w.rows(); ++r) left(r, 0) = w(r, len - 1);
    b.leftover = std::move(left);
  }
  return b;
}

Matrix haar_inverse_rows(const HaarBands& b) {
  if (b.axis != Axis::rows) fail(ErrorCode::inconsistent, "haar_inverse_rows: bands are column-wise");
  const std::size_t half = b.original_len / 2;
  const std::size_t rows = b.lo.rows();
  if (b.lo.cols() != half || b.hi.cols() != half || b.hi.rows() != rows) {
    fail(ErrorCode::inconsistent, "haar_inverse_rows: band shapes do not match length " +
                                      std::to_string(b.original_len));
  }
  const bool odd = b.original_len % 2 == 1;
  if (odd != b.leftover.has_value() ||
      (odd && (b.leftover->rows() != rows || b.leftover->cols() != 1))) {
    fail(ErrorCode::inconsistent, "haar_inverse_rows: leftover column inconsistent with length");
  }
  const double k = kernel(b.norm).synthesis;
  Matrix w(rows, b.original_len);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto lo = b.lo.row(r);
    const auto hi = b.hi.row(r);
    auto out = w.row(r);
    for (std::size_t j = 0; j < half; ++j) {
      out[2 * j] = k * (lo[j] + hi[j]);
      out[2 * j + 1] = k * (lo[j] - hi[j]);
    }
    if (odd) out[b.original_len - 1] = (*b.leftover)(r, 0);
  }
  return w;
}

HaarBands haar_forward_cols(const Matrix& w, HaarNorm norm) {
  const std::size_t len = w.rows();
  if (len < 2) fail(ErrorCode::degenerate_input, "haar_forward_cols: need at least 2 rows");
  const std::size_t half = len / 2;
  const double k = kernel(norm).analysis;

  HaarBands b;
  b.axis = Axis::cols;
  b.original_len = len;
  b.norm = norm;
  b.lo = Matrix(half, w.cols());
  b.hi = Matrix(half, w.cols());
  for (std::size_t j = 0; j < half; ++j) {
    const auto top = w.row(2 * j);
    const auto bottom = w.row(2 * j + 1);
    auto lo = b.lo.row(j);
    auto hi = b.hi.row(j);
    for (std::size_t c = 0; c < w.cols(); ++c) {
      lo[c] = k * (top[c] + bottom[c]);
      hi[c] = k * (top[c] - bottom[c]);
    }
  }
  if (len % 2 == 1) {
    Matrix left(1, w.cols());
    for (std::size_t c = 0; c < w.cols(); ++c) left(0, c) = w(len - 1, c);
    b.leftover = std::move(left);
  }
  return b;
}

Matrix haar_inverse_cols(const HaarBands& b) {
  if (b.axis != Axis::cols) fail(ErrorCode::inconsistent, "haar_inverse_cols: bands are row-wise");
  const std::size_t half = b.original_len / 2;
  const std::size_t cols = b.lo.cols();
  if (b.lo.rows() != half || b.hi.rows() != half || b.hi.cols() != cols) {
    fail(ErrorCode::inconsistent, "haar_inverse_cols: band shapes do not match length " +
                                      std::to_string(b.original_len));
  }
  const bool odd = b.original_len % 2 == 1;
  if (odd != b.leftover.has_value() ||
      (odd && (b.leftover->rows() != 1 || b.leftover->cols() != cols))) {
    fail(ErrorCode::inconsistent, "haar_inverse_cols: leftover row inconsistent with length");
  }
  const double k = kernel(b.norm).synthesis;
  Matrix w(b.original_len, cols);
  for (std::size_t j = 0; j < half; ++j) {
    const auto lo = b.lo.row(j);
    const auto hi = b.hi.row(j);
    auto top = w.row(2 * j);
    auto bottom = w.row(2 * j + 1);
    for (std::size_t c = 0; c < cols; ++c) {
      top[c] = k * (lo[c] + hi[c]);
      bottom[c] = k * (lo[c] - hi[c]);
    }
  }
  if (odd) {
    for (std::size_t c = 0; c < cols; ++c) w(b.original_len - 1, c) = (*b.leftover)(0, c);
  }
  return w;
}

double highpass_energy(const Matrix& w, const ColumnOrdering& ordering) {
  if (ordering.m() != w.cols()) {
    fail(ErrorCode::permutation, "highpass_energy: ordering covers " +
                                     std::to_string(ordering.m()) + " columns, matrix has " +
                                     std::to_string(w.cols()));
  }
  ordering.validate();
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < ordering.m(); k += 2) {
    const std::size_t a = ordering.order[k];
    const std::size_t b = ordering.order[k + 1];
    double s = 0.0;
    for (std::size_t r = 0; r < w.rows(); ++r) {
      const double d = w(r, a) - w(r, b);
      s += d * d;
    }
    total += s;
  }
  return 0.25 * total;
}

double highpass_energy_via_transform(const Matrix& w, const ColumnOrdering& ordering) {
  if (ordering.m() != w.cols()) fail(ErrorCode::permutation, "highpass_energy: size mismatch");
  const auto bands = haar_forward_rows(apply_ordering(w, ordering), HaarNorm::average);
  const double f = frobenius_norm(bands.hi);
  return f * f;
}

}  // namespace hbvla
