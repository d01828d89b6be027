#include "bdpm/bitplane.hpp"

#include <algorithm>
#include <string>

#include "bdpm/binio.hpp"
#include "bdpm/fileio.hpp"

namespace bdpm {

namespace {

constexpr char kPackedMagic[] = "BDPM-BP1";
constexpr std::size_t kMagicLen = 8;

}  // namespace

BitPlaneTensor decompose(const Image8& image, int n) {
  require(n == kBitDepth, ErrorKind::kInvalidArgument,
          "decompose: bit-depth " + std::to_string(n) + " is not supported for 8-bit input (only 8)");
  require(image.height >= 1 && image.width >= 1 && (image.channels == 1 || image.channels == 3),
          ErrorKind::kInvalidArgument, "decompose: invalid image shape");
  require(image.data.size() == static_cast<std::size_t>(image.channels) * image.plane_size(),
          ErrorKind::kInvalidArgument, "decompose: pixel buffer does not match shape");

  BitPlaneTensor out(image.channels * n, image.height, image.width, n);
  const std::size_t hw = image.plane_size();
  for (int c = 0; c < image.channels; ++c) {
    const std::uint8_t* src = image.data.data() + c * hw;
    for (int k = 0; k < n; ++k) {
      const int shift = n - 1 - k;
      std::uint8_t* dst = out.bits.data() + (static_cast<std::size_t>(c) * n + k) * hw;
      for (std::size_t i = 0; i < hw; ++i) dst[i] = static_cast<std::uint8_t>((src[i] >> shift) & 1u);
    }
  }
  return out;
}

Image8 recompose(const BitPlaneTensor& planes) {
  const int n = planes.bit_depth;
  require(n == kBitDepth, ErrorKind::kInvalidArgument, "recompose: only bit-depth 8 is supported");
  require(planes.planes > 0 && planes.planes % n == 0, ErrorKind::kInvalidArgument,
          "recompose: plane count " + std::to_string(planes.planes) + " is not a multiple of " +
              std::to_string(n));
  const int channels = planes.planes / n;
  require(channels == 1 || channels == 3, ErrorKind::kInvalidArgument, "recompose: channel count must be 1 or 3");

  Image8 out(channels, planes.height, planes.width);
  const std::size_t hw = out.plane_size();
  for (int c = 0; c < channels; ++c) {
    std::uint8_t* dst = out.data.data() + c * hw;
    for (int k = 0; k < n; ++k) {
      const int shift = n - 1 - k;
      const std::uint8_t* src = planes.bits.data() + (static_cast<std::size_t>(c) * n + k) * hw;
      for (std::size_t i = 0; i < hw; ++i) dst[i] = static_cast<std::uint8_t>(dst[i] | ((src[i] & 1u) << shift));
    }
  }
  return out;
}

bool is_binary(const BitPlaneTensor& t) {
  return std::all_of(t.bits.begin(), t.bits.end(), [](std::uint8_t b) { return b <= 1; });
}

BitPlaneTensor xor_planes(const BitPlaneTensor& a, const BitPlaneTensor& b) {
  require(a.same_shape(b), ErrorKind::kShapeMismatch, "xor: tensor shapes differ");
  BitPlaneTensor out = a;
  for (std::size_t i = 0; i < out.bits.size(); ++i) out.bits[i] ^= b.bits[i];
  return out;
}

std::vector<std::uint64_t> pack_bits(const BitPlaneTensor& t) {
  std::vector<std::uint64_t> words((t.bits.size() + 63) / 64, 0);
  for (std::size_t i = 0; i < t.bits.size(); ++i)
    words[i / 64] |= static_cast<std::uint64_t>(t.bits[i] & 1u) << (i % 64);
  return words;
}

BitPlaneTensor unpack_bits(std::span<const std::uint64_t> words, int planes, int height, int width,
                           int bit_depth) {
  require(planes >= 0 && height >= 0 && width >= 0, ErrorKind::kInvalidArgument, "unpack: negative shape");
  const std::size_t count = static_cast<std::size_t>(planes) * height * width;
  require(words.size() == (count + 63) / 64, ErrorKind::kShapeMismatch,
          "unpack: buffer holds " + std::to_string(words.size()) + " words, shape needs " +
              std::to_string((count + 63) / 64));
  BitPlaneTensor out(planes, height, width, bit_depth);
  for (std::size_t i = 0; i < count; ++i) out.bits[i] = static_cast<std::uint8_t>((words[i / 64] >> (i % 64)) & 1u);
  return out;
}

void write_packed_planes(const std::filesystem::path& path, const BitPlaneTensor& t) {
  require(t.bit_depth >= 1 && t.planes % t.bit_depth == 0, ErrorKind::kInvalidArgument,
          "packed file: plane count must be a multiple of the bit-depth");
  binio::Writer w;
  w.str(std::string_view(kPackedMagic, kMagicLen));
  w.u32(static_cast<std::uint32_t>(t.channels()));
  w.u32(static_cast<std::uint32_t>(t.bit_depth));
  w.u32(static_cast<std::uint32_t>(t.height));
  w.u32(static_cast<std::uint32_t>(t.width));
  for (std::uint64_t word : pack_bits(t)) w.u64(word);
  write_file_atomic(path, w.buffer());
}

BitPlaneTensor read_packed_planes(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  binio::Reader r(bytes);
  require(r.remaining() >= kMagicLen && r.str(kMagicLen) == std::string_view(kPackedMagic, kMagicLen),
          ErrorKind::kCorruptFile, "packed file: bad magic in " + path.string());
  const auto channels = r.u32();
  const auto n = r.u32();
  const auto height = r.u32();
  const auto width = r.u32();
  require(n >= 1 && n <= 8 && channels >= 1 && channels <= 64 && height <= (1u << 16) && width <= (1u << 16),
          ErrorKind::kCorruptFile, "packed file: implausible header");
  const std::size_t count = static_cast<std::size_t>(channels) * n * height * width;
  const std::size_t nwords = (count + 63) / 64;
  require(r.remaining() == nwords * 8, ErrorKind::kCorruptFile, "packed file: payload size does not match header");
  std::vector<std::uint64_t> words(nwords);
  for (auto& word : words) word = r.u64();
  return unpack_bits(words, static_cast<int>(channels * n), static_cast<int>(height), static_cast<int>(width),
                     static_cast<int>(n));
}

}  // namespace bdpm
