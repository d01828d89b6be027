#pragma once

#include "bdpm/image.hpp"

namespace bdpm {

/// Bilinear resize with half-pixel-centre (align-corners false) geometry,
/// edge clamping, and round-half-away-from-zero quantization.
Image8 resize_bilinear(const Image8& image, int out_height, int out_width);

/// Keeps every factor-th pixel starting at offset 0.
Image8 stride_downsample(const Image8& image, int factor);

Image8 crop(const Image8& image, int y0, int x0, int height, int width);

Image8 flip_horizontal(const Image8& image);

/// Rec. 601 luma in double precision (the image itself for one channel).
std::vector<double> luma(const Image8& image);

}  // namespace bdpm
