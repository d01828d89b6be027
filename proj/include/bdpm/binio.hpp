#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bdpm/error.hpp"

namespace bdpm::binio {

static_assert(std::endian::native == std::endian::little, "on-disk formats assume a little-endian host");

/// Append-only little-endian byte sink.
class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  void str(std::string_view s) { bytes(s.data(), s.size()); }
  template <typename T>
  void pod(T v) {
    bytes(&v, sizeof(T));
  }
  void u32(std::uint32_t v) { pod(v); }
  void u64(std::uint64_t v) { pod(v); }
  /// u32 length prefix followed by the raw characters.
  void lstr(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    str(s);
  }

  std::size_t size() const { return buf_.size(); }
  const std::vector<std::uint8_t>& buffer() const { return buf_; }
  std::vector<std::uint8_t>& buffer() { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

/// Bounds-checked reader; any overrun raises kCorruptFile.
class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  void bytes(void* out, std::size_t n) {
    require(n <= remaining(), ErrorKind::kCorruptFile, "truncated file");
    std::memcpy(out, data_.data() + pos_, n);
    pos_ += n;
  }
  std::string str(std::size_t n) {
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  template <typename T>
  T pod() {
    T v;
    bytes(&v, sizeof(T));
    return v;
  }
  std::uint32_t u32() { return pod<std::uint32_t>(); }
  std::uint64_t u64() { return pod<std::uint64_t>(); }
  std::string lstr() { return str(u32()); }

  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }
  void seek(std::size_t pos) {
    require(pos <= data_.size(), ErrorKind::kCorruptFile, "offset past end of file");
    pos_ = pos;
  }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace bdpm::binio
