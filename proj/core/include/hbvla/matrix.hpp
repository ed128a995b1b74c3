// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hbvla/error.hpp"

namespace hbvla {

/// Storage precision at file boundaries. Computation is always f64.
enum class Precision { f32, f64 };

/// Row-major dense real matrix.
///
/// All arithmetic is carried out in double precision; the precision tag only
/// records how the matrix should be written back to disk. Entries are kept
/// finite: constructing from data that contains NaN/Inf throws.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, Precision precision = Precision::f64);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data,
         Precision precision = Precision::f64);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  Precision precision() const noexcept { return precision_; }
  void set_precision(Precision p) noexcept { precision_ = p; }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  std::vector<double> col(std::size_t c) const;
  void set_col(std::size_t c, std::span<const double> values);

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  /// Throws ErrorCode::numerical if any entry is NaN or Inf.
  void check_finite(const char* context) const;

  friend bool operator==(const Matrix& a, const Matrix& b) noexcept {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
  Precision precision_ = Precision::f64;
};

Matrix transpose(const Matrix& a);

/// Triple-loop product with f64 accumulation.
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);

double frobenius_norm(const Matrix& a);
double frobenius_distance(const Matrix& a, const Matrix& b);
double max_abs(const Matrix& a);

/// Gathers the listed columns (in order) into a new rows x idx.size() matrix.
Matrix gather_columns(const Matrix& a, std::span<const std::size_t> idx);

}  // namespace hbvla
