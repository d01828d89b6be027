#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "bdpm/dataset.hpp"
#include "bdpm/metrics.hpp"
#include "bdpm/parallel.hpp"
#include "bdpm/sampler.hpp"
#include "bdpm/trainer.hpp"

namespace bdpm {

/// One held-out example: ground truth plus the condition the model sees.
struct EvalItem {
  std::string id;
  std::uint64_t key = 0;  // stable hash of id, keys every per-item RNG stream
  Image8 truth;
  Conditioning cond;
};

std::uint64_t id_key(const std::string& id);

/// Conditions for a held-out split. Item randomness (mask, fill bits) is keyed
/// by (seed, id), so a subset or reordering sees identical conditions.
std::vector<EvalItem> build_eval_set(const std::vector<SynthImage>& items, const TaskConfig& task, std::uint64_t seed);

/// Samples every item (seed per item from cfg.seed and its key) and scores it.
/// The masked-region BER is reported when the condition carries a mask.
EvalReport evaluate_model(const Denoiser<float>& model, const NoiseSchedule& schedule,
                          const std::vector<EvalItem>& items, const SamplerConfig& cfg,
                          std::vector<Image8>* outputs = nullptr, int threads = worker_count());

/// The copy-condition baseline: the condition image itself as the prediction.
EvalReport evaluate_baseline(const std::vector<EvalItem>& items);

struct TrainLoopHooks {
  std::function<void(const StepMetrics&)> on_step;
  std::int64_t checkpoint_every = 0;
  std::function<void(const TrainState<float>&)> on_checkpoint;
};

/// Runs train_step until state.step == until_step. Each step's batch is drawn
/// from state.step_rng(), so stopping and resuming does not change the run.
void train_loop(TrainState<float>& state, const std::vector<Image8>& images, const TaskConfig& task,
                std::int64_t until_step, const TrainLoopHooks& hooks = {});

/// Denoiser shape implied by image channels and task.
DenoiserSpec spec_for(int channels, Task task, DenoiserSpec base = {});

}  // namespace bdpm
