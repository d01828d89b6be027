#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "bdpm/config.hpp"
#include "bdpm/experiment.hpp"

namespace bdpm {

/// Everything a run needs. Built from flat `key = value` text; a run is
/// reproducible from its resolved config alone.
///
///   seed                      default for train.seed, sample.seed, data.seed
///   task                      inpainting | super-resolution
///   out                       output directory
///   data.manifest             dataset manifest; empty = procedural corpus
///   data.train_split          split names inside the manifest
///   data.eval_split
///   data.kind                 procedural corpus: gradient|disc|checker|noise|mixed
///   data.train_count, data.eval_count, data.size, data.channels, data.seed
///   mask.lo, mask.hi          inpainting coverage band
///   sr.factor                 super-resolution stride
///   model.width0, model.width1, model.temb_dim
///   train.*                   see TrainConfig; plus log_every, checkpoint_every, resume
///   schedule.T, schedule.beta_start, schedule.beta_end
///   sample.steps, sample.threshold, sample.seed, sample.diagnostics
///   eval.count                held-out items to use (0 = all)
///   sweep.steps               comma-separated step counts
struct RunConfig {
  std::uint64_t seed = 0;
  TaskConfig task;
  std::filesystem::path out = "run";

  std::filesystem::path manifest;
  std::string train_split = "train";
  std::string eval_split = "test";
  SynthKind synth_kind = SynthKind::kMixed;
  int train_count = 2000;
  int eval_count = 100;
  int image_size = 32;
  int channels = 3;
  std::uint64_t data_seed = 0;

  DenoiserSpec spec;
  TrainConfig train;
  std::int64_t log_every = 100;
  std::int64_t checkpoint_every = 1000;
  bool resume = false;

  SamplerConfig sampler;
  int diagnostics = 0;
  int eval_limit = 0;
  std::vector<int> sweep_steps = {1, 2, 5, 10, 20, 30, 50, 100};

  /// Unknown keys are rejected so typos do not silently fall back to defaults.
  static RunConfig from(const KeyValues& kv);
  KeyValues resolved() const;
};

/// Exit status for each error kind; 0 is success and 1 an unexpected failure.
int exit_code(ErrorKind kind);
inline constexpr int kExitUsage = 2;

std::vector<Image8> load_train_images(const RunConfig& cfg);
std::vector<SynthImage> load_eval_items(const RunConfig& cfg);
std::vector<EvalItem> eval_set(const RunConfig& cfg);

/// Trains (or resumes) and leaves config.txt, metrics.csv and checkpoint.bin in cfg.out.
TrainState<float> cmd_train(const RunConfig& cfg, std::ostream& log);

/// Samples the held-out split with the EMA weights; writes <id>.ppm, the
/// condition image <id>_cond.ppm and, for inpainting, <id>_mask.pgm.
void cmd_sample(const RunConfig& cfg, const std::filesystem::path& checkpoint, const std::filesystem::path& dir,
                std::ostream& log);

/// Scores predictions in `pred_dir` against the held-out split; writes eval.csv.
EvalReport cmd_eval(const RunConfig& cfg, const std::filesystem::path& pred_dir, std::ostream& log);

/// Exhaustive 0..255 round trip, `random_images` random 32x32 RGB images, and
/// every image of the configured corpus, through planes, packing and the file
/// format. Throws kInvariant on the first mismatch.
void cmd_codec_check(const RunConfig& cfg, int random_images, std::ostream& log);

struct SweepRow {
  int steps = 0;
  EvalReport report;
};

/// Evaluates the checkpoint at every cfg.sweep_steps value; writes sweep.csv and sweep.md.
std::vector<SweepRow> cmd_step_sweep(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                                     std::ostream& log);

}  // namespace bdpm
