// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "hbvla/pipeline.hpp"

namespace hbvla {

inline constexpr std::uint16_t kHbqVersion = 1;

// .hbq layout (little-endian):
//   "HBQ1" | u16 version | u32 n | u32 m | config block | u64 payload bits |
//   payload (MSB-first bit stream, zero padded to a byte) | u32 CRC32
// The config block is u8 normalization, u8 max_groups, u32 group_window,
// u8 split_scope, u8 salient planes, u32 salient count, u8 flags
// (bit0: odd-m leftover column present, bit1: odd-n leftover row present).
// Payload sections in order: ordering, salient indices, non-salient bands,
// salient residual, leftover column.

std::vector<std::uint8_t> serialize_layer(const BinarizedLayer& layer);
BinarizedLayer deserialize_layer(std::span<const std::uint8_t> bytes);

/// Bits in the payload section of the serialized form.
std::uint64_t payload_bits(std::span<const std::uint8_t> bytes);

void write_layer(const std::filesystem::path& path, const BinarizedLayer& layer);
BinarizedLayer read_layer(const std::filesystem::path& path);

std::uint32_t crc32(std::span<const std::uint8_t> bytes) noexcept;

}  // namespace hbvla
