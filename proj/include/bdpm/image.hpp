#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "bdpm/error.hpp"

namespace bdpm {

/// 8-bit image stored channel-major: data[(c * height + y) * width + x].
struct Image8 {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  Image8() = default;
  Image8(int c, int h, int w, std::uint8_t fill = 0)
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {
    require(c == 1 || c == 3, ErrorKind::kInvalidArgument, "Image8: channels must be 1 or 3");
    require(h >= 1 && w >= 1, ErrorKind::kInvalidArgument, "Image8: height and width must be >= 1");
  }

  std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }
  std::size_t size() const { return data.size(); }

  std::uint8_t& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  std::uint8_t at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }

  bool same_shape(const Image8& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
  friend bool operator==(const Image8&, const Image8&) = default;
};

/// Binary tensor of shape (planes, height, width), one byte per bit.
///
/// For image data the planes are grouped per channel (all planes of channel 0,
/// then channel 1, ...) and ordered MSB-first inside each group, so plane k of
/// a channel carries the coefficient of 2^(bit_depth - 1 - k).
struct BitPlaneTensor {
  int planes = 0;
  int height = 0;
  int width = 0;
  int bit_depth = 8;
  std::vector<std::uint8_t> bits;

  BitPlaneTensor() = default;
  BitPlaneTensor(int p, int h, int w, int depth = 8)
      : planes(p), height(h), width(w), bit_depth(depth), bits(static_cast<std::size_t>(p) * h * w, 0) {}

  int channels() const { return bit_depth > 0 ? planes / bit_depth : 0; }
  std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }
  std::size_t size() const { return bits.size(); }

  std::uint8_t& at(int p, int y, int x) { return bits[(static_cast<std::size_t>(p) * height + y) * width + x]; }
  std::uint8_t at(int p, int y, int x) const {
    return bits[(static_cast<std::size_t>(p) * height + y) * width + x];
  }

  bool same_shape(const BitPlaneTensor& o) const {
    return planes == o.planes && height == o.height && width == o.width;
  }
  friend bool operator==(const BitPlaneTensor&, const BitPlaneTensor&) = default;
};

}  // namespace bdpm
