// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "hbvla/haar.hpp"
#include "hbvla/rng.hpp"
#include "oracles.hpp"

using namespace hbvla;

namespace {

double band_norm_sq(const HaarBands& b) {
  double s = std::pow(frobenius_norm(b.lo), 2) + std::pow(frobenius_norm(b.hi), 2);
  if (b.leftover) s += std::pow(frobenius_norm(*b.leftover), 2);
  return s;
}

ColumnOrdering random_ordering(Rng& rng, std::size_t m) {
  ColumnOrdering p = ColumnOrdering::identity(m);
  for (std::size_t i = m; i > 1; --i) std::swap(p.order[i - 1], p.order[rng.below(i)]);
  return p;
}

}  // namespace

TEST_SUITE("haar") {

TEST_CASE("forward rows: average and difference") {
  const auto b = haar_forward_rows(Matrix::from_rows({{1, 3, 2, 6}}));
  CHECK(b.lo == Matrix::from_rows({{2, 4}}));
  CHECK(b.hi == Matrix::from_rows({{-1, -2}}));
  CHECK_FALSE(b.leftover.has_value());
  CHECK(b.axis == Axis::rows);
  CHECK(b.original_len == 4);
}

TEST_CASE("forward rows: odd length keeps the last column") {
  const auto b = haar_forward_rows(Matrix::from_rows({{1, 3, 5}}));
  CHECK(b.lo == Matrix::from_rows({{2}}));
  CHECK(b.hi == Matrix::from_rows({{-1}}));
  REQUIRE(b.leftover.has_value());
  CHECK(*b.leftover == Matrix::from_rows({{5}}));
}

TEST_CASE("constant rows have a zero high band") {
  Matrix w(3, 7);
  for (double& v : w.data()) v = 2.75;
  const auto b = haar_forward_rows(w);
  CHECK(max_abs(b.hi) == 0.0);
  CHECK(max_abs(haar_forward_rows(w, HaarNorm::orthonormal).hi) == 0.0);
}

TEST_CASE("inverse rows: pairwise reconstruction") {
  HaarBands b;
  b.axis = Axis::rows;
  b.original_len = 4;
  b.lo = Matrix::from_rows({{2, 4}});
  b.hi = Matrix::from_rows({{-1, -2}});
  CHECK(haar_inverse_rows(b) == Matrix::from_rows({{1, 3, 2, 6}}));
  b.hi = Matrix(1, 2);
  const Matrix eq = haar_inverse_rows(b);
  CHECK(eq(0, 0) == eq(0, 1));
  CHECK(eq(0, 2) == eq(0, 3));
}

TEST_CASE("band shape mismatch is an inconsistency") {
  auto b = haar_forward_rows(Matrix::from_rows({{1, 2, 3, 4}}));
  b.hi = Matrix(1, 3);
  CHECK_THROWS_AS(haar_inverse_rows(b), Error);
  auto c = haar_forward_cols(Matrix::from_rows({{1}, {2}}));
  CHECK_THROWS_AS(haar_inverse_rows(c), Error);
}

TEST_CASE("degenerate inputs") {
  try {
    haar_forward_rows(Matrix(3, 1));
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::degenerate_input);
  }
  CHECK_THROWS_AS(haar_forward_cols(Matrix(1, 3)), Error);
}

TEST_CASE("forward cols: pairwise and odd rows") {
  const auto b = haar_forward_cols(Matrix::from_rows({{1}, {3}}));
  CHECK(b.lo == Matrix::from_rows({{2}}));
  CHECK(b.hi == Matrix::from_rows({{-1}}));
  Rng rng(4);
  const auto odd = haar_forward_cols(oracle::random_matrix(rng, 5, 3));
  REQUIRE(odd.leftover.has_value());
  CHECK(odd.leftover->rows() == 1);
  CHECK(odd.leftover->cols() == 3);
}

TEST_CASE("column transform is the transposed row transform") {
  Rng rng(5);
  for (auto norm : {HaarNorm::average, HaarNorm::orthonormal}) {
    const Matrix w = oracle::random_matrix(rng, 6, 4);
    const auto c = haar_forward_cols(w, norm);
    const auto r = haar_forward_rows(transpose(w), norm);
    CHECK(oracle::max_abs_diff(c.lo, transpose(r.lo)) <= 1e-15);
    CHECK(oracle::max_abs_diff(c.hi, transpose(r.hi)) <= 1e-15);
  }
}

TEST_CASE("perfect reconstruction, both axes and normalizations") {
  Rng rng(6);
  const Matrix w = oracle::random_matrix(rng, 8, 16);
  CHECK(oracle::max_abs_diff(haar_inverse_rows(haar_forward_rows(w)), w) <= 1e-12);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 2 + rng.below(9), m = 2 + rng.below(9);
    const Matrix x = oracle::random_matrix(rng, n, m, 10.0);
    for (auto norm : {HaarNorm::average, HaarNorm::orthonormal}) {
      CHECK(oracle::max_abs_diff(haar_inverse_rows(haar_forward_rows(x, norm)), x) <= 1e-12);
      CHECK(oracle::max_abs_diff(haar_inverse_cols(haar_forward_cols(x, norm)), x) <= 1e-12);
    }
  }
}

TEST_CASE("orthonormal transform preserves the Frobenius norm; averaging one does not") {
  Rng rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const Matrix w = oracle::random_matrix(rng, 3 + rng.below(4), 2 + rng.below(9));
    const double wn = std::pow(frobenius_norm(w), 2);
    CHECK(std::abs(band_norm_sq(haar_forward_rows(w, HaarNorm::orthonormal)) - wn) <= 1e-10 * wn);
    CHECK(std::abs(band_norm_sq(haar_forward_cols(w, HaarNorm::orthonormal)) - wn) <= 1e-10 * wn);
  }
  // Averaging kernels halve the energy of the paired part.
  const Matrix w = Matrix::from_rows({{1, 3, 2, 6}});
  CHECK(band_norm_sq(haar_forward_rows(w)) == doctest::Approx(0.5 * 50.0));
}

TEST_CASE("high-pass energy: hand example and equal columns") {
  const Matrix w = Matrix::from_rows({{2, 0}, {0, 0}});
  CHECK(highpass_energy(w, ColumnOrdering::identity(2)) == 1.0);
  Matrix eq(4, 6);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 6; ++c) eq(r, c) = static_cast<double>(r) - 1.5;
  CHECK(highpass_energy(eq, ColumnOrdering::identity(6)) == 0.0);
}

TEST_CASE("high-pass energy: pairwise path equals transform path") {
  Rng rng(8);
  const Matrix w = oracle::random_matrix(rng, 4, 6);
  const auto id = ColumnOrdering::identity(6);
  CHECK(std::abs(highpass_energy(w, id) - highpass_energy_via_transform(w, id)) <= 1e-10);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 2 + rng.below(12);
    const Matrix x = oracle::random_matrix(rng, 1 + rng.below(6), m, 3.0);
    const auto p = random_ordering(rng, m);
    CHECK(std::abs(highpass_energy(x, p) - highpass_energy_via_transform(x, p)) <= 1e-10);
  }
}

TEST_CASE("high-pass energy rejects invalid orderings") {
  const Matrix w(2, 4);
  ColumnOrdering bad;
  bad.order = {0, 1, 1, 3};
  try {
    highpass_energy(w, bad);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::permutation);
  }
}

}  // TEST_SUITE
