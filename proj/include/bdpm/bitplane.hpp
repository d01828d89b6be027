#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "bdpm/image.hpp"

namespace bdpm {

inline constexpr int kBitDepth = 8;

/// Splits every channel into MSB-first bit-planes. Only n = 8 is accepted.
BitPlaneTensor decompose(const Image8& image, int n = kBitDepth);

/// Exact inverse of decompose().
Image8 recompose(const BitPlaneTensor& planes);

/// True iff every element is 0 or 1.
bool is_binary(const BitPlaneTensor& t);

/// Elementwise XOR of two equally shaped tensors.
BitPlaneTensor xor_planes(const BitPlaneTensor& a, const BitPlaneTensor& b);

/// Packs bits into 64-bit words; element i lands in bit (i % 64) of word i / 64.
std::vector<std::uint64_t> pack_bits(const BitPlaneTensor& t);

/// Inverse of pack_bits for the declared shape.
BitPlaneTensor unpack_bits(std::span<const std::uint64_t> words, int planes, int height, int width,
                           int bit_depth = kBitDepth);

/// Packed-plane file: "BDPM-BP1", u32 channels, n, height, width, then packed words.
void write_packed_planes(const std::filesystem::path& path, const BitPlaneTensor& t);
BitPlaneTensor read_packed_planes(const std::filesystem::path& path);

}  // namespace bdpm
