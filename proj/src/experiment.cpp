#include "bdpm/experiment.hpp"

#include <chrono>

#include "bdpm/bitplane.hpp"
#include "bdpm/checkpoint.hpp"

namespace bdpm {

std::uint64_t id_key(const std::string& id) {
  return fnv1a64(reinterpret_cast<const std::uint8_t*>(id.data()), id.size());
}

std::vector<EvalItem> build_eval_set(const std::vector<SynthImage>& items, const TaskConfig& task, std::uint64_t seed) {
  std::vector<EvalItem> out;
  out.reserve(items.size());
  const Rng base(seed);
  for (const auto& item : items) {
    EvalItem e;
    e.id = std::filesystem::path(item.record.path).stem().string();
    e.key = id_key(e.id);
    e.truth = item.image;
    Rng rng = base.split({e.key, 0x636F6E64ull});
    e.cond = make_condition(item.image, task, rng);
    out.push_back(std::move(e));
  }
  return out;
}

EvalReport evaluate_model(const Denoiser<float>& model, const NoiseSchedule& schedule,
                          const std::vector<EvalItem>& items, const SamplerConfig& cfg, std::vector<Image8>* outputs,
                          int threads) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<Conditioning> conds;
  std::vector<std::uint64_t> keys;
  for (const auto& it : items) {
    conds.push_back(it.cond);
    keys.push_back(it.key);
  }
  const auto seeds = item_seeds(cfg.seed, keys);
  const auto results = sample_batch(model, schedule, std::span<const Conditioning>(conds), cfg,
                                    std::span<const std::uint64_t>(seeds), threads);
  EvalReport report;
  report.steps = cfg.steps;
  if (outputs) outputs->clear();
  for (std::size_t i = 0; i < items.size(); ++i) {
    require(results[i].image.has_value(), ErrorKind::kInvariant,
            "eval: sampling failed for " + items[i].id + ": " + results[i].error);
    const auto& it = items[i];
    report.rows.push_back(evaluate_pair(it.id, *results[i].image, it.truth, it.cond.mask ? &*it.cond.mask : nullptr));
    if (outputs) outputs->push_back(*results[i].image);
  }
  report.finalize();
  report.wallclock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

EvalReport evaluate_baseline(const std::vector<EvalItem>& items) {
  EvalReport report;
  for (const auto& it : items)
    report.rows.push_back(
        evaluate_pair(it.id, condition_image(it.cond), it.truth, it.cond.mask ? &*it.cond.mask : nullptr));
  report.finalize();
  return report;
}

void train_loop(TrainState<float>& state, const std::vector<Image8>& images, const TaskConfig& task,
                std::int64_t until_step, const TrainLoopHooks& hooks) {
  const auto& c = state.config;
  const AugmentConfig aug{c.crop_min, c.crop_max, c.flip};
  while (state.step < until_step) {
    const auto batch = build_training_batch(images, task, c.augment ? &aug : nullptr, c.batch_size, state.step_rng());
    const StepMetrics m = train_step(state, batch);
    if (hooks.on_step) hooks.on_step(m);
    if (hooks.on_checkpoint && hooks.checkpoint_every > 0 && state.step % hooks.checkpoint_every == 0)
      hooks.on_checkpoint(state);
  }
}

DenoiserSpec spec_for(int channels, Task task, DenoiserSpec base) {
  base.data_planes = channels * kBitDepth;
  base.cond_planes = base.data_planes + (task == Task::kInpainting ? 1 : 0);
  base.validate();
  return base;
}

}  // namespace bdpm
