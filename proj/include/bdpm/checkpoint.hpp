#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bdpm/trainer.hpp"

namespace bdpm {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Checkpoint layout (little-endian throughout):
///
///   "BDPM-CK1"                     8 bytes
///   version                        u32
///   config block                   u32 length + `key = value` text
///                                  (model.*, train.*, schedule.*, state.step)
///   tensor count                   u32
///   per tensor: name (u32 length + bytes), dtype u32 (0 = f32), rank u32,
///               dims u32 x rank, payload offset u64, element count u64
///   payload length                 u64
///   payload                        IEEE-754 f32 values
///   FNV-1a 64 of all prior bytes   u64
///
/// Tensor names are "<group>.<parameter>" with group in {params, ema, adam_m, adam_v}.
std::vector<std::uint8_t> encode_checkpoint(const TrainState<float>& state);
TrainState<float> decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const TrainState<float>& state, const std::filesystem::path& path);
TrainState<float> load_checkpoint(const std::filesystem::path& path);

/// The EMA denoiser stored in a checkpoint.
Denoiser<float> load_ema_model(const std::filesystem::path& path);

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t n);

}  // namespace bdpm
