#pragma once

#include <algorithm>
#include <concepts>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bdpm/bitplane.hpp"
#include "bdpm/conditioning.hpp"
#include "bdpm/denoiser.hpp"
#include "bdpm/noise.hpp"
#include "bdpm/parallel.hpp"

namespace bdpm {

struct SamplerConfig {
  int steps = 30;
  double threshold = 0.5;
  std::uint64_t seed = 0;
};

/// Anything that maps (x_t, t, y_e) to paired logits.
template <typename M>
concept DenoiserModel = requires(const M& m, const BitPlaneTensor& x, int t, const Conditioning& y) {
  { m.predict(x, t, y).x0_logits.rows() } -> std::convertible_to<Eigen::Index>;
  { m.predict(x, t, y).z_logits.rows() } -> std::convertible_to<Eigen::Index>;
};

/// steps + 1 values evenly spaced on [0, total], rounded half up, deduplicated, descending.
std::vector<int> select_timesteps(int steps, int total);

struct SampleStep {
  int t = 0;
  BitPlaneTensor x0_hat;
  double next_beta = 0.0;           // flip probability of the re-noise after this step (0 on the last)
  double predicted_flip_rate = 0.0; // fraction of bits the z head flags as flipped
  double applied_flip_rate = 0.0;   // fraction of bits actually flipped by the re-noise
};

struct SampleTrace {
  std::vector<SampleStep> steps;
};

/// Reverse process: x_T ~ fair coins; at each selected t predict x0, binarize,
/// and (except at the last selected timestep) re-noise with beta at the next
/// selected timestep. Returns the recomposed final prediction.
template <DenoiserModel Model>
Image8 sample(const Model& model, const NoiseSchedule& schedule, const Conditioning& y, const SamplerConfig& cfg,
              SampleTrace* trace = nullptr) {
  require(y.valid(), ErrorKind::kShapeMismatch, "sample: invalid condition");
  const Shape3 shape{y.planes.planes, y.planes.height, y.planes.width, y.planes.bit_depth};
  const std::vector<int> ts = select_timesteps(cfg.steps, schedule.total_steps());
  const Rng rng(cfg.seed);

  Rng init_rng = rng.split({0x696E6974ull});
  BitPlaneTensor x = bernoulli_mask(shape, 0.5, init_rng);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const int t = ts[i];
    const auto out = model.predict(x, t, y);
    require(out.x0_logits.allFinite(), ErrorKind::kNumeric, "sample: non-finite logits at t=" + std::to_string(t));
    require(out.x0_logits.rows() == shape.planes, ErrorKind::kShapeMismatch, "sample: denoiser output plane count");
    BitPlaneTensor x0_hat = binarize(out.x0_logits, shape.height, shape.width, cfg.threshold, shape.bit_depth);

    SampleStep rec;
    if (trace) {
      rec.t = t;
      rec.x0_hat = x0_hat;
      const auto z_hat = binarize(out.z_logits, shape.height, shape.width, 0.5, shape.bit_depth);
      rec.predicted_flip_rate = static_cast<double>(std::count(z_hat.bits.begin(), z_hat.bits.end(), 1)) /
                                static_cast<double>(std::max<std::size_t>(1, z_hat.size()));
    }
    if (i + 1 == ts.size()) {
      if (trace) trace->steps.push_back(std::move(rec));
      return recompose(x0_hat);
    }
    const int next_t = ts[i + 1];
    const NoiseDraw draw = sample_noise(schedule, next_t, shape, rng.split({static_cast<std::uint64_t>(i)}));
    x = apply_noise(x0_hat, draw.z);
    if (trace) {
      rec.next_beta = schedule.beta(next_t);
      rec.applied_flip_rate = static_cast<double>(std::count(draw.z.bits.begin(), draw.z.bits.end(), 1)) /
                              static_cast<double>(std::max<std::size_t>(1, draw.z.size()));
      trace->steps.push_back(std::move(rec));
    }
  }
  fail(ErrorKind::kInvariant, "sample: empty timestep list");
}

struct SampleResult {
  std::optional<Image8> image;
  std::string error;
};

/// Independent sample() per condition; item i uses seed item_seeds[i].
/// Failures are reported per item.
template <DenoiserModel Model>
std::vector<SampleResult> sample_batch(const Model& model, const NoiseSchedule& schedule,
                                       std::span<const Conditioning> conditions, const SamplerConfig& cfg,
                                       std::span<const std::uint64_t> item_seeds, int threads = worker_count()) {
  require(item_seeds.size() == conditions.size(), ErrorKind::kInvalidArgument,
          "sample_batch: need one seed per condition");
  std::vector<SampleResult> results(conditions.size());
  parallel_for(
      conditions.size(),
      [&](std::size_t i) {
        SamplerConfig item_cfg = cfg;
        item_cfg.seed = item_seeds[i];
        try {
          results[i].image = sample(model, schedule, conditions[i], item_cfg);
        } catch (const std::exception& e) {
          results[i].error = e.what();
        }
      },
      threads);
  return results;
}

/// Per-item seeds derived from a run seed and stable item ids.
std::vector<std::uint64_t> item_seeds(std::uint64_t seed, std::span<const std::uint64_t> ids);

/// Writes one image per traced step plus steps.csv (index, t, next_beta,
/// predicted_flip_rate, applied_flip_rate).
void write_sample_diagnostics(const std::filesystem::path& dir, const SampleTrace& trace);

}  // namespace bdpm
