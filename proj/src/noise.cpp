#include "bdpm/noise.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bdpm/bitplane.hpp"

namespace bdpm {

NoiseSchedule::NoiseSchedule(int total_steps, double beta_start, double beta_end)
    : total_steps_(total_steps), beta_start_(beta_start), beta_end_(beta_end) {
  require(total_steps >= 1, ErrorKind::kInvalidArgument, "schedule: T must be >= 1");
  require(beta_start >= 0.0 && beta_end <= 0.5 && beta_start < beta_end, ErrorKind::kInvalidArgument,
          "schedule: need 0 <= beta_start < beta_end <= 0.5");
  const double s0 = std::sqrt(beta_start);
  const double s1 = std::sqrt(beta_end);
  betas_.resize(static_cast<std::size_t>(total_steps) + 1);
  for (int t = 0; t <= total_steps; ++t) {
    const double s = s0 + (static_cast<double>(t) / total_steps) * (s1 - s0);
    betas_[t] = s * s;
  }
  // Pin the endpoints so they do not inherit sqrt rounding.
  betas_.front() = beta_start;
  betas_.back() = beta_end;
}

double NoiseSchedule::beta(int t) const {
  require(t >= 0 && t <= total_steps_, ErrorKind::kInvalidArgument,
          "schedule: timestep " + std::to_string(t) + " outside [0, " + std::to_string(total_steps_) + "]");
  return betas_[static_cast<std::size_t>(t)];
}

void NoiseSchedule::set_plane_multipliers(std::vector<double> multipliers) {
  for (double m : multipliers)
    require(std::isfinite(m) && m >= 0.0, ErrorKind::kInvalidArgument, "schedule: plane multipliers must be >= 0");
  plane_multipliers_ = std::move(multipliers);
}

double NoiseSchedule::plane_beta(int t, int plane_in_channel) const {
  const double b = beta(t);
  if (plane_multipliers_.empty()) return b;
  require(plane_in_channel >= 0 && plane_in_channel < static_cast<int>(plane_multipliers_.size()),
          ErrorKind::kInvalidArgument, "schedule: plane index outside multiplier table");
  return std::clamp(b * plane_multipliers_[plane_in_channel], 0.0, 0.5);
}

BitPlaneTensor bernoulli_mask(const Shape3& shape, double p, Rng& rng) {
  BitPlaneTensor z(shape.planes, shape.height, shape.width, shape.bit_depth);
  if (p <= 0.0) return z;
  for (auto& b : z.bits) b = rng.bernoulli(p) ? 1 : 0;
  return z;
}

NoiseDraw sample_noise(const NoiseSchedule& schedule, int t, const Shape3& shape, const Rng& rng) {
  require(shape.planes >= 0 && shape.height >= 0 && shape.width >= 0, ErrorKind::kInvalidArgument,
          "sample_noise: negative shape");
  NoiseDraw draw;
  draw.t = t;
  draw.seed = derive_seed(rng.seed(), {static_cast<std::uint64_t>(t), 0x6E6F697365ull});
  Rng local(draw.seed);
  if (schedule.plane_multipliers().empty()) {
    draw.z = bernoulli_mask(shape, schedule.beta(t), local);
    return draw;
  }
  draw.z = BitPlaneTensor(shape.planes, shape.height, shape.width, shape.bit_depth);
  const std::size_t hw = draw.z.plane_size();
  const int depth = std::max(1, shape.bit_depth);
  for (int p = 0; p < shape.planes; ++p) {
    const double prob = schedule.plane_beta(t, p % depth);
    std::uint8_t* dst = draw.z.bits.data() + static_cast<std::size_t>(p) * hw;
    for (std::size_t i = 0; i < hw; ++i) dst[i] = local.bernoulli(prob) ? 1 : 0;
  }
  return draw;
}

BitPlaneTensor apply_noise(const BitPlaneTensor& x0, const BitPlaneTensor& z) {
  require(x0.same_shape(z), ErrorKind::kShapeMismatch, "apply_noise: x0 and z shapes differ");
  return xor_planes(x0, z);
}

}  // namespace bdpm
