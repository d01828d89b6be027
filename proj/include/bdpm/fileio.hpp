#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace bdpm {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace bdpm
