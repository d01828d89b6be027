#include "bdpm/checkpoint.hpp"

#include <array>
#include <cmath>
#include <cstring>

#include "bdpm/binio.hpp"
#include "bdpm/fileio.hpp"

namespace bdpm {

namespace {

constexpr char kMagic[] = "BDPM-CK1";
constexpr std::size_t kMagicLen = 8;
constexpr std::uint32_t kDtypeF32 = 0;
constexpr std::array<const char*, 4> kGroups = {"params", "ema", "adam_m", "adam_v"};

const VectorX<float>& group_vector(const TrainState<float>& s, std::size_t g) {
  switch (g) {
    case 0: return s.model.parameters();
    case 1: return s.ema;
    case 2: return s.adam_m;
    default: return s.adam_v;
  }
}

VectorX<float>& group_vector(TrainState<float>& s, std::size_t g) {
  return const_cast<VectorX<float>&>(group_vector(static_cast<const TrainState<float>&>(s), g));
}

struct TableEntry {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::uint64_t offset = 0;
  std::uint64_t count = 0;
};

}  // namespace

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::vector<std::uint8_t> encode_checkpoint(const TrainState<float>& state) {
  const auto n = static_cast<Eigen::Index>(state.model.parameter_count());
  require(state.ema.size() == n && state.adam_m.size() == n && state.adam_v.size() == n, ErrorKind::kInvariant,
          "checkpoint: state vectors are not initialized");

  KeyValues kv;
  write_spec(kv, state.model.spec());
  state.config.write(kv);
  kv.set("state.step", state.step);
  const std::string config_text = kv.serialize();

  binio::Writer w;
  w.str(std::string_view(kMagic, kMagicLen));
  w.u32(kCheckpointVersion);
  w.lstr(config_text);

  const auto& infos = state.model.tensors();
  w.u32(static_cast<std::uint32_t>(kGroups.size() * infos.size()));
  std::uint64_t offset = 0;
  for (const char* group : kGroups) {
    for (const auto& info : infos) {
      w.lstr(std::string(group) + "." + info.name);
      w.u32(kDtypeF32);
      w.u32(static_cast<std::uint32_t>(info.shape.size()));
      for (int d : info.shape) w.u32(static_cast<std::uint32_t>(d));
      w.u64(offset);
      w.u64(info.size);
      offset += info.size * sizeof(float);
    }
  }
  w.u64(offset);
  for (std::size_t g = 0; g < kGroups.size(); ++g) {
    const auto& v = group_vector(state, g);
    w.bytes(v.data(), static_cast<std::size_t>(v.size()) * sizeof(float));
  }
  w.u64(fnv1a64(w.buffer().data(), w.size()));
  return std::move(w.buffer());
}

TrainState<float> decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  require(bytes.size() >= kMagicLen + 4 + 8, ErrorKind::kCorruptFile, "checkpoint: file too short");
  require(std::memcmp(bytes.data(), kMagic, kMagicLen) == 0, ErrorKind::kCorruptFile, "checkpoint: bad magic");
  std::uint64_t stored_sum;
  std::memcpy(&stored_sum, bytes.data() + bytes.size() - 8, 8);
  require(fnv1a64(bytes.data(), bytes.size() - 8) == stored_sum, ErrorKind::kCorruptFile,
          "checkpoint: checksum mismatch (truncated or corrupt file)");

  binio::Reader r(std::span(bytes.data(), bytes.size() - 8));
  r.seek(kMagicLen);
  const auto version = r.u32();
  require(version == kCheckpointVersion, ErrorKind::kCorruptFile,
          "checkpoint: unsupported version " + std::to_string(version));
  const KeyValues kv = KeyValues::parse(r.lstr());

  const DenoiserSpec spec = read_spec(kv);
  const TrainConfig config = TrainConfig::read(kv);
  TrainState<float> state(config, spec, LossWeights::for_data_planes(spec.data_planes));
  state.step = kv.get_int("state.step", 0);
  require(state.step >= 0, ErrorKind::kCorruptFile, "checkpoint: negative step counter");

  const auto count = r.u32();
  std::vector<TableEntry> table(count);
  for (auto& e : table) {
    e.name = r.lstr();
    require(r.u32() == kDtypeF32, ErrorKind::kCorruptFile, "checkpoint: unsupported dtype for " + e.name);
    const auto rank = r.u32();
    require(rank <= 8, ErrorKind::kCorruptFile, "checkpoint: implausible rank for " + e.name);
    e.dims.resize(rank);
    for (auto& d : e.dims) d = r.u32();
    e.offset = r.u64();
    e.count = r.u64();
  }
  const auto payload_len = r.u64();
  require(payload_len == r.remaining(), ErrorKind::kCorruptFile, "checkpoint: payload length mismatch");
  const std::size_t payload_start = r.position();

  const auto& infos = state.model.tensors();
  require(table.size() == kGroups.size() * infos.size(), ErrorKind::kCorruptFile,
          "checkpoint: tensor table does not match the architecture descriptor");
  for (std::size_t g = 0; g < kGroups.size(); ++g) {
    VectorX<float> v(static_cast<Eigen::Index>(state.model.parameter_count()));
    for (std::size_t i = 0; i < infos.size(); ++i) {
      const auto& e = table[g * infos.size() + i];
      const auto& info = infos[i];
      require(e.name == std::string(kGroups[g]) + "." + info.name, ErrorKind::kCorruptFile,
              "checkpoint: unexpected tensor " + e.name);
      require(e.count == info.size && e.dims.size() == info.shape.size(), ErrorKind::kCorruptFile,
              "checkpoint: shape mismatch for " + e.name);
      for (std::size_t d = 0; d < e.dims.size(); ++d)
        require(static_cast<int>(e.dims[d]) == info.shape[d], ErrorKind::kCorruptFile,
                "checkpoint: shape mismatch for " + e.name);
      require(e.offset + e.count * sizeof(float) <= payload_len, ErrorKind::kCorruptFile,
              "checkpoint: tensor " + e.name + " extends past payload");
      r.seek(payload_start + e.offset);
      r.bytes(v.data() + info.offset, info.size * sizeof(float));
    }
    require(v.allFinite(), ErrorKind::kCorruptFile, "checkpoint: non-finite values in group " + std::string(kGroups[g]));
    group_vector(state, g) = std::move(v);
  }
  return state;
}

void save_checkpoint(const TrainState<float>& state, const std::filesystem::path& path) {
  write_file_atomic(path, encode_checkpoint(state));
}

TrainState<float> load_checkpoint(const std::filesystem::path& path) {
  require(std::filesystem::exists(path), ErrorKind::kIo, "checkpoint: file not found: " + path.string());
  return decode_checkpoint(read_file(path));
}

Denoiser<float> load_ema_model(const std::filesystem::path& path) { return load_checkpoint(path).ema_model(); }

}  // namespace bdpm
