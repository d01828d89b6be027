#pragma once

#include <cstdint>
#include <vector>

#include "bdpm/image.hpp"
#include "bdpm/rng.hpp"

namespace bdpm {

/// Quadratic flip-probability schedule
///   beta(t) = (sqrt(beta_start) + t/T * (sqrt(beta_end) - sqrt(beta_start)))^2,
/// precomputed in double precision for t = 0..T.
class NoiseSchedule {
 public:
  NoiseSchedule() : NoiseSchedule(1000, 1e-5, 0.5) {}
  NoiseSchedule(int total_steps, double beta_start, double beta_end);

  int total_steps() const { return total_steps_; }
  double beta_start() const { return beta_start_; }
  double beta_end() const { return beta_end_; }
  const std::vector<double>& betas() const { return betas_; }

  /// Flip probability at timestep t; throws for t outside [0, T].
  double beta(int t) const;

  /// Per-plane multipliers on beta (index = plane within a channel, MSB first).
  /// Empty means 1 for every plane. The product is clamped to [0, 0.5].
  void set_plane_multipliers(std::vector<double> multipliers);
  const std::vector<double>& plane_multipliers() const { return plane_multipliers_; }
  double plane_beta(int t, int plane_in_channel) const;

 private:
  int total_steps_;
  double beta_start_;
  double beta_end_;
  std::vector<double> betas_;
  std::vector<double> plane_multipliers_;
};

/// A drawn noise mask and the provenance needed to redraw it.
struct NoiseDraw {
  BitPlaneTensor z;
  int t = 0;
  std::uint64_t seed = 0;
};

struct Shape3 {
  int planes = 0;
  int height = 0;
  int width = 0;
  int bit_depth = 8;
};

/// Fills a mask with independent Bernoulli(p) bits from `rng`.
BitPlaneTensor bernoulli_mask(const Shape3& shape, double p, Rng& rng);

/// Draws z_t with every bit ~ Bernoulli(beta_t) (times the plane multiplier, if set).
/// The mask is a pure function of (rng seed, t, shape); `rng` itself is not advanced.
NoiseDraw sample_noise(const NoiseSchedule& schedule, int t, const Shape3& shape, const Rng& rng);

/// x_t = x0 XOR z.
BitPlaneTensor apply_noise(const BitPlaneTensor& x0, const BitPlaneTensor& z);

}  // namespace bdpm
