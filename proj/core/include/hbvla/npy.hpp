// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "hbvla/matrix.hpp"

namespace hbvla {

// NPY v1.0 container: "\x93NUMPY", version 1.0, u16 LE header length, an ASCII
// dict with descr ('<f4' | '<f8'), fortran_order (False only) and shape,
// then a little-endian C-order payload. Rank 0/1 tensors load as 1 x n.

Matrix decode_npy(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_npy(const Matrix& m);

Matrix read_tensor(const std::filesystem::path& path);
/// Writes with the matrix's own precision tag.
void write_tensor(const std::filesystem::path& path, const Matrix& m);

}  // namespace hbvla
