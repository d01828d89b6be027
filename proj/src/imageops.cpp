#include "bdpm/imageops.hpp"

#include <algorithm>
#include <cmath>

namespace bdpm {

namespace {

struct Tap {
  int i0;
  int i1;
  double frac;
};

std::vector<Tap> bilinear_taps(int in_size, int out_size) {
  std::vector<Tap> taps(static_cast<std::size_t>(out_size));
  const double scale = static_cast<double>(in_size) / out_size;
  for (int o = 0; o < out_size; ++o) {
    double s = (o + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(in_size - 1));
    const int i0 = static_cast<int>(std::floor(s));
    const int i1 = std::min(i0 + 1, in_size - 1);
    taps[o] = {i0, i1, s - i0};
  }
  return taps;
}

}  // namespace

Image8 resize_bilinear(const Image8& image, int out_height, int out_width) {
  require(out_height >= 1 && out_width >= 1, ErrorKind::kInvalidArgument, "resize: output size must be positive");
  const auto ty = bilinear_taps(image.height, out_height);
  const auto tx = bilinear_taps(image.width, out_width);
  Image8 out(image.channels, out_height, out_width);
  for (int c = 0; c < image.channels; ++c)
    for (int y = 0; y < out_height; ++y)
      for (int x = 0; x < out_width; ++x) {
        const auto& a = ty[y];
        const auto& b = tx[x];
        const double top = (1.0 - b.frac) * image.at(c, a.i0, b.i0) + b.frac * image.at(c, a.i0, b.i1);
        const double bottom = (1.0 - b.frac) * image.at(c, a.i1, b.i0) + b.frac * image.at(c, a.i1, b.i1);
        const double v = (1.0 - a.frac) * top + a.frac * bottom;
        out.at(c, y, x) = static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
      }
  return out;
}

Image8 stride_downsample(const Image8& image, int factor) {
  require(factor >= 1, ErrorKind::kInvalidArgument, "downsample: factor must be >= 1");
  require(image.height % factor == 0 && image.width % factor == 0, ErrorKind::kInvalidArgument,
          "downsample: image " + std::to_string(image.height) + "x" + std::to_string(image.width) +
              " is not divisible by factor " + std::to_string(factor));
  Image8 out(image.channels, image.height / factor, image.width / factor);
  for (int c = 0; c < image.channels; ++c)
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x) out.at(c, y, x) = image.at(c, y * factor, x * factor);
  return out;
}

Image8 crop(const Image8& image, int y0, int x0, int height, int width) {
  require(y0 >= 0 && x0 >= 0 && height >= 1 && width >= 1 && y0 + height <= image.height &&
              x0 + width <= image.width,
          ErrorKind::kInvalidArgument, "crop: window outside image");
  Image8 out(image.channels, height, width);
  for (int c = 0; c < image.channels; ++c)
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) out.at(c, y, x) = image.at(c, y0 + y, x0 + x);
  return out;
}

Image8 flip_horizontal(const Image8& image) {
  Image8 out = image;
  for (int c = 0; c < image.channels; ++c)
    for (int y = 0; y < image.height; ++y)
      for (int x = 0; x < image.width; ++x) out.at(c, y, x) = image.at(c, y, image.width - 1 - x);
  return out;
}

std::vector<double> luma(const Image8& image) {
  std::vector<double> out(image.plane_size());
  const std::size_t hw = image.plane_size();
  if (image.channels == 1) {
    for (std::size_t i = 0; i < hw; ++i) out[i] = image.data[i];
    return out;
  }
  for (std::size_t i = 0; i < hw; ++i)
    out[i] = 0.299 * image.data[i] + 0.587 * image.data[hw + i] + 0.114 * image.data[2 * hw + i];
  return out;
}

}  // namespace bdpm
