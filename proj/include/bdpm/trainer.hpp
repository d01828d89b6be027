#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "bdpm/config.hpp"
#include "bdpm/denoiser.hpp"
#include "bdpm/loss.hpp"
#include "bdpm/noise.hpp"
#include "bdpm/parallel.hpp"
#include "bdpm/rng.hpp"

namespace bdpm {

struct TrainConfig {
  double learning_rate = 1e-4;
  double weight_decay = 1e-6;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::int64_t total_steps = 20000;
  int batch_size = 8;
  double ema_decay = 0.995;
  int ema_every = 10;
  int schedule_steps = 1000;
  double beta_start = 1e-5;
  double beta_end = 0.5;
  std::uint64_t seed = 0;
  bool augment = true;
  double crop_min = 0.8;
  double crop_max = 1.0;
  bool flip = true;
  // Optional extras, off by default: linear warmup then cosine decay to zero
  // over total_steps, and clipping of the batch gradient's L2 norm.
  bool cosine = false;
  std::int64_t warmup_steps = 0;
  double grad_clip = 0.0;

  /// Learning rate used for the update that takes the state from `step` to step + 1.
  double learning_rate_at(std::int64_t step) const;

  void validate() const;
  void write(KeyValues& kv, const std::string& prefix = "train.") const;
  static TrainConfig read(const KeyValues& kv, const std::string& prefix = "train.");
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

void write_spec(KeyValues& kv, const DenoiserSpec& spec, const std::string& prefix = "model.");
DenoiserSpec read_spec(const KeyValues& kv, const std::string& prefix = "model.");

/// One training example: the clean bit-planes and their condition.
struct TrainExample {
  BitPlaneTensor x0;
  Conditioning cond;
};

struct StepMetrics {
  std::int64_t step = 0;
  double loss = 0.0;
  double loss_x = 0.0;
  double loss_z = 0.0;
  double learning_rate = 0.0;
  std::vector<int> timesteps;
};

/// ema <- decay * ema + (1 - decay) * params.
template <typename DerivedA, typename DerivedB>
void ema_update(Eigen::MatrixBase<DerivedA>& ema, const Eigen::MatrixBase<DerivedB>& params, double decay) {
  using Scalar = typename DerivedA::Scalar;
  require(ema.size() == params.size(), ErrorKind::kShapeMismatch, "ema_update: parameter counts differ");
  const auto d = static_cast<Scalar>(decay);
  ema.derived() = d * ema.derived() + (Scalar(1) - d) * params.derived();
}

/// Per-example timesteps for one step, uniform on [0, T]; a pure function of the step stream.
std::vector<int> draw_training_timesteps(const Rng& step_rng, int batch, int total_steps);

/// Full optimizer state. The step stream Rng(seed).split({step}) is the only
/// randomness, so (seed, step) is the complete RNG state.
template <typename Scalar>
struct TrainState {
  TrainConfig config;
  NoiseSchedule schedule;
  LossWeights weights;
  Denoiser<Scalar> model;
  VectorX<Scalar> ema;
  VectorX<Scalar> adam_m;
  VectorX<Scalar> adam_v;
  std::int64_t step = 0;

  TrainState(TrainConfig cfg, DenoiserSpec spec, LossWeights w)
      : config(cfg),
        schedule(cfg.schedule_steps, cfg.beta_start, cfg.beta_end),
        weights(std::move(w)),
        model(spec) {
    config.validate();
    require(spec.max_timestep == cfg.schedule_steps, ErrorKind::kConfig,
            "train: denoiser max_timestep must equal the schedule length");
    require(static_cast<int>(weights.planes.size()) == spec.data_planes &&
                static_cast<int>(weights.noise.size()) == spec.data_planes,
            ErrorKind::kConfig, "train: loss weights do not match data planes");
  }

  /// Fresh parameters; EMA starts equal to them, moments at zero.
  void initialize(std::uint64_t init_seed) {
    model.initialize(init_seed);
    ema = model.parameters();
    adam_m = VectorX<Scalar>::Zero(model.parameters().size());
    adam_v = VectorX<Scalar>::Zero(model.parameters().size());
    step = 0;
  }

  /// Denoiser carrying the EMA weights, used for all evaluation.
  Denoiser<Scalar> ema_model() const {
    Denoiser<Scalar> m(model.spec());
    m.parameters() = ema;
    return m;
  }

  Rng step_rng() const { return Rng(config.seed).split({static_cast<std::uint64_t>(step), 0x7472616Eull}); }
};

struct GradientResult {
  double loss = 0.0;
  double loss_x = 0.0;
  double loss_z = 0.0;
  std::vector<int> timesteps;
};

/// A training example after forward noising: x_t = x0 XOR z at timestep t.
struct NoisedExample {
  BitPlaneTensor x_t;
  BitPlaneTensor x0;
  BitPlaneTensor z;
  int t = 0;
  Conditioning cond;
};

/// Forward noising of a batch; example i uses the sub-stream step_rng.split({i, tag}).
std::vector<NoisedExample> noise_batch(const NoiseSchedule& schedule, const std::vector<TrainExample>& batch,
                                       const Rng& step_rng);

/// Batch-mean loss over already noised examples; `grad` receives the batch-mean
/// gradient. Examples may run on several threads; per-example gradients are
/// summed in index order, so the result does not depend on the thread count.
template <typename Scalar>
GradientResult noised_gradient(const Denoiser<Scalar>& model, const LossWeights& weights,
                               const std::vector<NoisedExample>& batch, VectorX<Scalar>& grad,
                               int threads = worker_count()) {
  require(!batch.empty(), ErrorKind::kInvalidArgument, "train: empty batch");
  const auto n = static_cast<Eigen::Index>(model.parameters().size());
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  std::vector<VectorX<Scalar>> item_grad(batch.size());
  std::vector<LossResult<Scalar>> item_loss(batch.size());
  parallel_for(
      batch.size(),
      [&](std::size_t i) {
        const auto& ex = batch[i];
        typename Denoiser<Scalar>::Tape tape;
        const auto out = model.forward(ex.x_t, ex.t, ex.cond, &tape);
        auto& loss = item_loss[i];
        loss = bce_loss(out.x0_logits, out.z_logits, ex.x0, ex.z, weights);
        loss.d_x0 *= static_cast<Scalar>(inv_b);
        loss.d_z *= static_cast<Scalar>(inv_b);
        item_grad[i] = VectorX<Scalar>::Zero(n);
        model.backward(tape, loss.d_x0, loss.d_z, item_grad[i]);
      },
      threads);

  GradientResult res;
  grad = VectorX<Scalar>::Zero(n);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    res.timesteps.push_back(batch[i].t);
    res.loss += inv_b * item_loss[i].total;
    res.loss_x += inv_b * item_loss[i].loss_x;
    res.loss_z += inv_b * item_loss[i].loss_z;
    grad += item_grad[i];
  }
  return res;
}

/// Noises each example at its own uniform t, then noised_gradient().
template <typename Scalar>
GradientResult compute_gradient(const Denoiser<Scalar>& model, const NoiseSchedule& schedule,
                                const LossWeights& weights, const std::vector<TrainExample>& batch,
                                const Rng& step_rng, VectorX<Scalar>& grad) {
  return noised_gradient(model, weights, noise_batch(schedule, batch, step_rng), grad);
}

/// AdamW with bias correction; weight decay is applied directly to the parameters.
template <typename Scalar>
void adamw_update(TrainState<Scalar>& s, const VectorX<Scalar>& grad) {
  const auto& c = s.config;
  const std::int64_t k = s.step + 1;
  const Scalar b1 = static_cast<Scalar>(c.adam_beta1);
  const Scalar b2 = static_cast<Scalar>(c.adam_beta2);
  const Scalar lr = static_cast<Scalar>(c.learning_rate_at(s.step));
  const Scalar c1 = static_cast<Scalar>(1.0 - std::pow(c.adam_beta1, static_cast<double>(k)));
  const Scalar c2 = static_cast<Scalar>(1.0 - std::pow(c.adam_beta2, static_cast<double>(k)));
  const Scalar eps = static_cast<Scalar>(c.adam_eps);

  auto& p = s.model.parameters();
  s.adam_m = b1 * s.adam_m + (Scalar(1) - b1) * grad;
  s.adam_v = b2 * s.adam_v + (Scalar(1) - b2) * grad.cwiseAbs2();
  p *= Scalar(1) - lr * static_cast<Scalar>(c.weight_decay);
  p.array() -= lr * (s.adam_m.array() / c1) / ((s.adam_v.array() / c2).sqrt() + eps);
}

/// Applies one optimizer update from a batch gradient (plus the periodic EMA
/// update). On a non-finite loss or gradient the state is left untouched and a
/// kNumeric error is thrown.
template <typename Scalar>
StepMetrics apply_gradient(TrainState<Scalar>& s, const GradientResult& g, const VectorX<Scalar>& grad) {
  require(std::isfinite(g.loss), ErrorKind::kNumeric,
          "train: non-finite loss at step " + std::to_string(s.step) + "; step aborted");
  require(grad.allFinite(), ErrorKind::kNumeric,
          "train: non-finite gradient at step " + std::to_string(s.step) + "; step aborted");

  const double lr = s.config.learning_rate_at(s.step);
  const double norm = static_cast<double>(grad.norm());
  if (s.config.grad_clip > 0.0 && norm > s.config.grad_clip) {
    adamw_update(s, VectorX<Scalar>(grad * static_cast<Scalar>(s.config.grad_clip / norm)));
  } else {
    adamw_update(s, grad);
  }
  ++s.step;
  if (s.config.ema_every > 0 && s.step % s.config.ema_every == 0) ema_update(s.ema, s.model.parameters(), s.config.ema_decay);

  StepMetrics m;
  m.step = s.step;
  m.loss = g.loss;
  m.loss_x = g.loss_x;
  m.loss_z = g.loss_z;
  m.learning_rate = lr;
  m.timesteps = g.timesteps;
  return m;
}

/// One training step: t ~ U{0..T} per example, x_t = x0 XOR z_t, forward,
/// loss, backward, AdamW, EMA. All randomness comes from s.step_rng().
template <typename Scalar>
StepMetrics train_step(TrainState<Scalar>& s, const std::vector<TrainExample>& batch) {
  VectorX<Scalar> grad;
  const GradientResult g = compute_gradient(s.model, s.schedule, s.weights, batch, s.step_rng(), grad);
  return apply_gradient(s, g, grad);
}

}  // namespace bdpm
