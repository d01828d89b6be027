#include "bdpm/trainer.hpp"

#include <algorithm>
#include <cmath>

namespace bdpm {

double TrainConfig::learning_rate_at(std::int64_t step) const {
  if (warmup_steps > 0 && step < warmup_steps)
    return learning_rate * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
  if (!cosine || total_steps <= warmup_steps) return learning_rate;
  const double span = static_cast<double>(total_steps - warmup_steps);
  const double frac = std::min(1.0, static_cast<double>(step - warmup_steps) / span);
  return 0.5 * learning_rate * (1.0 + std::cos(M_PI * frac));
}

void TrainConfig::validate() const {
  require(learning_rate > 0.0 && weight_decay >= 0.0, ErrorKind::kConfig,
          "train: learning rate must be > 0 and weight decay >= 0");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0 && adam_eps > 0.0,
          ErrorKind::kConfig, "train: invalid Adam moment parameters");
  require(ema_decay > 0.0 && ema_decay < 1.0, ErrorKind::kConfig, "train: EMA decay must be in (0, 1)");
  require(ema_every >= 1, ErrorKind::kConfig, "train: EMA update frequency must be >= 1");
  require(total_steps >= 0 && batch_size >= 1, ErrorKind::kConfig, "train: need total_steps >= 0 and batch_size >= 1");
  require(crop_min > 0.0 && crop_min <= crop_max && crop_max <= 1.0, ErrorKind::kConfig,
          "train: crop fractions must satisfy 0 < crop_min <= crop_max <= 1");
  require(warmup_steps >= 0 && grad_clip >= 0.0, ErrorKind::kConfig, "train: warmup and grad_clip must be >= 0");
}

void TrainConfig::write(KeyValues& kv, const std::string& prefix) const {
  kv.set(prefix + "lr", learning_rate);
  kv.set(prefix + "weight_decay", weight_decay);
  kv.set(prefix + "adam_beta1", adam_beta1);
  kv.set(prefix + "adam_beta2", adam_beta2);
  kv.set(prefix + "adam_eps", adam_eps);
  kv.set(prefix + "steps", total_steps);
  kv.set(prefix + "batch", batch_size);
  kv.set(prefix + "ema_decay", ema_decay);
  kv.set(prefix + "ema_every", ema_every);
  kv.set(prefix + "seed", seed);
  kv.set(prefix + "augment", augment);
  kv.set(prefix + "crop_min", crop_min);
  kv.set(prefix + "crop_max", crop_max);
  kv.set(prefix + "flip", flip);
  kv.set(prefix + "lr_schedule", std::string(cosine ? "cosine" : "constant"));
  kv.set(prefix + "warmup", warmup_steps);
  kv.set(prefix + "grad_clip", grad_clip);
  kv.set("schedule.T", schedule_steps);
  kv.set("schedule.beta_start", beta_start);
  kv.set("schedule.beta_end", beta_end);
}

TrainConfig TrainConfig::read(const KeyValues& kv, const std::string& prefix) {
  TrainConfig c;
  c.learning_rate = kv.get_double(prefix + "lr", c.learning_rate);
  c.weight_decay = kv.get_double(prefix + "weight_decay", c.weight_decay);
  c.adam_beta1 = kv.get_double(prefix + "adam_beta1", c.adam_beta1);
  c.adam_beta2 = kv.get_double(prefix + "adam_beta2", c.adam_beta2);
  c.adam_eps = kv.get_double(prefix + "adam_eps", c.adam_eps);
  c.total_steps = kv.get_int(prefix + "steps", c.total_steps);
  c.batch_size = static_cast<int>(kv.get_int(prefix + "batch", c.batch_size));
  c.ema_decay = kv.get_double(prefix + "ema_decay", c.ema_decay);
  c.ema_every = static_cast<int>(kv.get_int(prefix + "ema_every", c.ema_every));
  c.seed = kv.get_u64(prefix + "seed", kv.get_u64("seed", c.seed));
  c.augment = kv.get_bool(prefix + "augment", c.augment);
  c.crop_min = kv.get_double(prefix + "crop_min", c.crop_min);
  c.crop_max = kv.get_double(prefix + "crop_max", c.crop_max);
  c.flip = kv.get_bool(prefix + "flip", c.flip);
  const std::string sched = kv.get(prefix + "lr_schedule", c.cosine ? "cosine" : "constant");
  require(sched == "constant" || sched == "cosine", ErrorKind::kConfig,
          "train: lr_schedule must be 'constant' or 'cosine', got '" + sched + "'");
  c.cosine = sched == "cosine";
  c.warmup_steps = kv.get_int(prefix + "warmup", c.warmup_steps);
  c.grad_clip = kv.get_double(prefix + "grad_clip", c.grad_clip);
  c.schedule_steps = static_cast<int>(kv.get_int("schedule.T", c.schedule_steps));
  c.beta_start = kv.get_double("schedule.beta_start", c.beta_start);
  c.beta_end = kv.get_double("schedule.beta_end", c.beta_end);
  c.validate();
  return c;
}

void write_spec(KeyValues& kv, const DenoiserSpec& spec, const std::string& prefix) {
  kv.set(prefix + "data_planes", spec.data_planes);
  kv.set(prefix + "cond_planes", spec.cond_planes);
  kv.set(prefix + "width0", spec.width0);
  kv.set(prefix + "width1", spec.width1);
  kv.set(prefix + "temb_dim", spec.temb_dim);
  kv.set(prefix + "max_timestep", spec.max_timestep);
}

DenoiserSpec read_spec(const KeyValues& kv, const std::string& prefix) {
  DenoiserSpec s;
  s.data_planes = static_cast<int>(kv.get_int(prefix + "data_planes", s.data_planes));
  s.cond_planes = static_cast<int>(kv.get_int(prefix + "cond_planes", s.cond_planes));
  s.width0 = static_cast<int>(kv.get_int(prefix + "width0", s.width0));
  s.width1 = static_cast<int>(kv.get_int(prefix + "width1", s.width1));
  s.temb_dim = static_cast<int>(kv.get_int(prefix + "temb_dim", s.temb_dim));
  s.max_timestep = static_cast<int>(kv.get_int(prefix + "max_timestep", s.max_timestep));
  s.validate();
  return s;
}

std::vector<int> draw_training_timesteps(const Rng& step_rng, int batch, int total_steps) {
  Rng rng = step_rng.split({0x74696D65ull});
  std::vector<int> ts(static_cast<std::size_t>(batch));
  for (auto& t : ts) t = static_cast<int>(rng.uniform_int(0, total_steps));
  return ts;
}

std::vector<NoisedExample> noise_batch(const NoiseSchedule& schedule, const std::vector<TrainExample>& batch,
                                       const Rng& step_rng) {
  const std::vector<int> ts = draw_training_timesteps(step_rng, static_cast<int>(batch.size()), schedule.total_steps());
  std::vector<NoisedExample> out;
  out.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& ex = batch[i];
    const Rng item_rng = step_rng.split({static_cast<std::uint64_t>(i), 0x6E6F6973ull});
    const Shape3 shape{ex.x0.planes, ex.x0.height, ex.x0.width, ex.x0.bit_depth};
    NoisedExample n;
    n.t = ts[i];
    n.z = sample_noise(schedule, n.t, shape, item_rng).z;
    n.x_t = apply_noise(ex.x0, n.z);
    n.x0 = ex.x0;
    n.cond = ex.cond;
    out.push_back(std::move(n));
  }
  return out;
}

}  // namespace bdpm
