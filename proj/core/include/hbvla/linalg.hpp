// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <vector>

#include "hbvla/matrix.hpp"

namespace hbvla {

/// Lower-triangular L with A = L L^T, or nullopt if A is not positive definite.
std::optional<Matrix> cholesky(const Matrix& a);

/// Inverse of a symmetric positive definite matrix through its Cholesky factor.
/// Throws ErrorCode::singular when the factorization breaks down.
Matrix spd_inverse(const Matrix& a);

/// Eigenvalues of a symmetric matrix (cyclic Jacobi), ascending.
std::vector<double> symmetric_eigenvalues(const Matrix& a);

double mean_diagonal(const Matrix& a);

}  // namespace hbvla
