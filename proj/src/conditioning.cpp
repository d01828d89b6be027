#include "bdpm/conditioning.hpp"

#include <algorithm>

#include "bdpm/bitplane.hpp"
#include "bdpm/imageops.hpp"

namespace bdpm {

std::string to_string(Task task) { return task == Task::kInpainting ? "inpainting" : "super-resolution"; }

Task parse_task(const std::string& name) {
  if (name == "inpainting" || name == "inpaint") return Task::kInpainting;
  if (name == "super-resolution" || name == "sr") return Task::kSuperResolution;
  fail(ErrorKind::kConfig, "unknown task '" + name + "' (expected inpainting or super-resolution)");
}

bool Conditioning::valid() const {
  if (!is_binary(planes)) return false;
  if ((task == Task::kInpainting) != mask.has_value()) return false;
  if (mask) {
    if (mask->planes != 1 || mask->height != planes.height || mask->width != planes.width) return false;
    if (!is_binary(*mask)) return false;
  }
  return true;
}

Image8 sr_degrade(const Image8& image, int factor) {
  const Image8 low = stride_downsample(image, factor);
  return resize_bilinear(low, image.height, image.width);
}

Conditioning build_sr_condition(const Image8& image, int factor) {
  Conditioning c;
  c.task = Task::kSuperResolution;
  c.planes = decompose(sr_degrade(image, factor));
  return c;
}

Conditioning build_inpaint_condition(const Image8& image, const MaskSpec& mask, Rng& rng) {
  require(mask.mask.planes == 1 && mask.mask.height == image.height && mask.mask.width == image.width,
          ErrorKind::kShapeMismatch, "inpaint: mask and image sizes differ");
  Conditioning c;
  c.task = Task::kInpainting;
  c.planes = decompose(image);
  const std::size_t hw = image.plane_size();
  for (int p = 0; p < c.planes.planes; ++p) {
    std::uint8_t* dst = c.planes.bits.data() + static_cast<std::size_t>(p) * hw;
    for (std::size_t i = 0; i < hw; ++i)
      if (mask.mask.bits[i]) dst[i] = rng.bernoulli(0.5) ? 1 : 0;
  }
  c.mask = mask.mask;
  return c;
}

MaskSpec generate_mask(int height, int width, CoverageBand band, Rng& rng) {
  require(height >= 1 && width >= 1, ErrorKind::kInvalidArgument, "mask: size must be positive");
  require(band.lo > 0.0 && band.lo <= band.hi && band.hi <= 1.0, ErrorKind::kInvalidArgument,
          "mask: coverage band must satisfy 0 < lo <= hi <= 1");
  MaskSpec spec;
  spec.seed = rng.seed();
  const double total = static_cast<double>(height) * width;

  if (band.lo >= 1.0) {
    spec.mask = BitPlaneTensor(1, height, width, 1);
    std::fill(spec.mask.bits.begin(), spec.mask.bits.end(), 1);
    spec.coverage = 1.0;
    spec.rectangles = 1;
    return spec;
  }

  const int min_h = std::max(1, height / 8);
  const int max_h = std::max(min_h, height / 2);
  const int min_w = std::max(1, width / 8);
  const int max_w = std::max(min_w, width / 2);
  constexpr int kAttempts = 1000;
  constexpr int kMaxRects = 64;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    BitPlaneTensor m(1, height, width, 1);
    std::size_t covered = 0;
    const double target = rng.uniform(band.lo, band.hi);
    int rects = 0;
    while (covered < target * total && rects < kMaxRects) {
      const int rh = static_cast<int>(rng.uniform_int(min_h, max_h));
      const int rw = static_cast<int>(rng.uniform_int(min_w, max_w));
      const int y0 = static_cast<int>(rng.uniform_int(0, height - rh));
      const int x0 = static_cast<int>(rng.uniform_int(0, width - rw));
      for (int y = y0; y < y0 + rh; ++y)
        for (int x = x0; x < x0 + rw; ++x) {
          auto& b = m.at(0, y, x);
          if (!b) {
            b = 1;
            ++covered;
          }
        }
      ++rects;
    }
    const double coverage = static_cast<double>(covered) / total;
    if (coverage >= band.lo && coverage <= band.hi) {
      spec.mask = std::move(m);
      spec.coverage = coverage;
      spec.rectangles = rects;
      return spec;
    }
  }
  fail(ErrorKind::kInvalidArgument, "mask: coverage band [" + std::to_string(band.lo) + ", " +
                                        std::to_string(band.hi) + "] unreachable for " + std::to_string(height) +
                                        "x" + std::to_string(width) + " after retries");
}

Image8 condition_image(const Conditioning& cond) { return recompose(cond.planes); }

}  // namespace bdpm
