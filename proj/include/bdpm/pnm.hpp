#pragma once

#include <filesystem>

#include "bdpm/image.hpp"

namespace bdpm {

/// Reads binary PGM (P5) or PPM (P6) with maxval 255.
Image8 read_pnm(const std::filesystem::path& path);

/// Writes P5 for one channel and P6 for three; header is "P5\n<w> <h>\n255\n".
void write_pnm(const std::filesystem::path& path, const Image8& image);

}  // namespace bdpm
