#pragma once

#include <optional>
#include <string>

#include "bdpm/image.hpp"
#include "bdpm/rng.hpp"

namespace bdpm {

enum class Task { kSuperResolution, kInpainting };

std::string to_string(Task task);
Task parse_task(const std::string& name);

/// Encoded side information y_e handed to the denoiser next to x_t.
struct Conditioning {
  Task task = Task::kSuperResolution;
  BitPlaneTensor planes;               // bit-planes of the degraded image
  std::optional<BitPlaneTensor> mask;  // one plane, 1 = missing; inpainting only

  int height() const { return planes.height; }
  int width() const { return planes.width; }
  /// Total number of input channels this condition contributes.
  int plane_count() const { return planes.planes + (mask ? mask->planes : 0); }
  bool valid() const;
  friend bool operator==(const Conditioning&, const Conditioning&) = default;
};

struct MaskSpec {
  BitPlaneTensor mask;  // one plane, 1 = missing
  double coverage = 0.0;
  int rectangles = 0;
  std::uint64_t seed = 0;
};

struct CoverageBand {
  double lo = 0.10;
  double hi = 0.30;
};

/// Every factor-th pixel (offset 0), bilinearly upsampled back and decomposed.
Conditioning build_sr_condition(const Image8& image, int factor = 4);

/// The low-resolution-then-upsampled image used by build_sr_condition.
Image8 sr_degrade(const Image8& image, int factor = 4);

/// Image bit-planes with every bit of a masked pixel replaced by a fair coin, plus the mask plane.
Conditioning build_inpaint_condition(const Image8& image, const MaskSpec& mask, Rng& rng);

/// Union of random axis-aligned rectangles whose coverage lands inside `band`.
MaskSpec generate_mask(int height, int width, CoverageBand band, Rng& rng);

/// Copy-condition baseline: recompose the condition's data planes (masked pixels stay random).
Image8 condition_image(const Conditioning& cond);

}  // namespace bdpm
