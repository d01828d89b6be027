#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "bdpm/conditioning.hpp"
#include "bdpm/image.hpp"
#include "bdpm/rng.hpp"
#include "bdpm/trainer.hpp"

namespace bdpm {

struct AugmentConfig {
  double crop_min = 0.8;
  double crop_max = 1.0;
  bool flip = true;
};

/// Random crop covering [crop_min, crop_max] of height and width (drawn
/// independently), bilinear resize back to the input size, then a horizontal
/// flip with probability 1/2 when enabled.
Image8 augment(const Image8& image, Rng& rng, const AugmentConfig& config);

enum class SynthKind { kGradient, kDisc, kChecker, kNoise, kMixed };

std::string to_string(SynthKind kind);
SynthKind parse_synth_kind(const std::string& name);

/// One line of a dataset manifest: `path=... split=... seed=... key=value ...`.
struct ManifestRecord {
  std::string path;
  std::string split;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> fields;
};

struct SynthImage {
  Image8 image;
  ManifestRecord record;
};

/// Procedural images (linear gradients, a single disc over a gradient,
/// checkerboards, band-limited noise). Item i depends only on (seed, i).
std::vector<SynthImage> synth_dataset(SynthKind kind, int count, int size, int channels, std::uint64_t seed);

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records);
std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path);

/// Writes every image next to the manifest (PGM/PPM) and the manifest itself.
void write_dataset(const std::filesystem::path& dir, const std::vector<SynthImage>& items, const std::string& split);

/// Images listed in a manifest (paths relative to the manifest's directory), optionally filtered by split.
std::vector<SynthImage> load_dataset(const std::filesystem::path& manifest, const std::string& split = "");

struct TaskConfig {
  Task task = Task::kInpainting;
  int sr_factor = 4;
  CoverageBand band;
};

/// Condition for one image; inpainting draws its mask and fill bits from `rng`.
Conditioning make_condition(const Image8& image, const TaskConfig& task, Rng& rng);

/// A training batch for one step: images picked uniformly, augmented, conditioned.
std::vector<TrainExample> build_training_batch(const std::vector<Image8>& images, const TaskConfig& task,
                                               const AugmentConfig* augmentation, int batch_size, const Rng& step_rng);

}  // namespace bdpm
