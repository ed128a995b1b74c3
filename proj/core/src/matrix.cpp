// SPDX-License-Identifier: Apache-2.0
#include "hbvla/matrix.hpp"

#include <cmath>
#include <string>

namespace hbvla {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::dimension: return "dimension";
    case ErrorCode::format: return "format";
    case ErrorCode::truncation: return "truncation";
    case ErrorCode::degenerate_input: return "degenerate_input";
    case ErrorCode::inconsistent: return "inconsistent";
    case ErrorCode::permutation: return "permutation";
    case ErrorCode::configuration: return "configuration";
    case ErrorCode::numerical: return "numerical";
    case ErrorCode::domain: return "domain";
    case ErrorCode::size_limit: return "size_limit";
    case ErrorCode::singular: return "singular";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

Matrix::Matrix(std::size_t rows, std::size_t cols, Precision precision)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0), precision_(precision) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data, Precision precision)
    : rows_(rows), cols_(cols), data_(std::move(data)), precision_(precision) {
  if (data_.size() != rows_ * cols_) {
    fail(ErrorCode::dimension, "matrix data length " + std::to_string(data_.size()) +
                                   " != " + std::to_string(rows_) + "x" + std::to_string(cols_));
  }
  check_finite("matrix construction");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.front().size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) fail(ErrorCode::dimension, "ragged rows in from_rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(data));
}

std::vector<double> Matrix::col(std::size_t c) const {
  std::vector<double> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

void Matrix::set_col(std::size_t c, std::span<const double> values) {
  if (values.size() != rows_) fail(ErrorCode::dimension, "set_col length mismatch");
  for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = values[r];
}

void Matrix::check_finite(const char* context) const {
  for (double v : data_) {
    if (!std::isfinite(v)) fail(ErrorCode::numerical, std::string("non-finite entry in ") + context);
  }
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows(), a.precision());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) t(c, r) = a(r, c);
  return t;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    fail(ErrorCode::dimension, "matmul: " + std::to_string(a.rows()) + "x" +
                                   std::to_string(a.cols()) + " times " +
                                   std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  Matrix out(a.rows(), b.cols(), a.precision());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto orow = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(ErrorCode::dimension, std::string(op) + ": shape mismatch " + std::to_string(a.rows()) +
                                   "x" + std::to_string(a.cols()) + " vs " +
                                   std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
}

}  // namespace

Matrix operator+(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "add");
  Matrix out = a;
  auto o = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bd[i];
  return out;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "subtract");
  Matrix out = a;
  auto o = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bd[i];
  return out;
}

Matrix operator*(double s, const Matrix& a) {
  Matrix out = a;
  for (double& v : out.data()) v *= s;
  return out;
}

double frobenius_norm(const Matrix& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v * v;
  return std::sqrt(acc);
}

double frobenius_distance(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "frobenius_distance");
  double acc = 0.0;
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) {
    const double d = ad[i] - bd[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

Matrix gather_columns(const Matrix& a, std::span<const std::size_t> idx) {
  Matrix out(a.rows(), idx.size(), a.precision());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (idx[k] >= a.cols()) fail(ErrorCode::dimension, "gather_columns: index out of range");
      out(r, k) = a(r, idx[k]);
    }
  }
  return out;
}

}  // namespace hbvla
