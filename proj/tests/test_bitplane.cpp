#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "bdpm/bitplane.hpp"
#include "bdpm/pnm.hpp"
#include "test_util.hpp"

using namespace bdpm;
using bdpm::testing::random_bits;
using bdpm::testing::random_image;

TEST_CASE("decompose: 150 is 10010110 MSB first") {
  Image8 img(1, 1, 1, 150);
  const auto planes = decompose(img);
  REQUIRE(planes.planes == 8);
  const std::vector<std::uint8_t> expected = {1, 0, 0, 1, 0, 1, 1, 0};
  CHECK(planes.bits == expected);
}

TEST_CASE("decompose: zero image gives zero planes") {
  const auto planes = decompose(Image8(1, 4, 4, 0));
  CHECK(planes.planes == 8);
  CHECK(planes.height == 4);
  CHECK(std::all_of(planes.bits.begin(), planes.bits.end(), [](auto b) { return b == 0; }));
}

TEST_CASE("decompose: rejects bit-depth other than 8") {
  CHECK_THROWS_AS(decompose(Image8(1, 2, 2), 4), Error);
  CHECK_THROWS_AS(decompose(Image8(1, 2, 2), 16), Error);
}

TEST_CASE("recompose: known planes") {
  BitPlaneTensor t(8, 1, 1);
  t.bits = {1, 0, 0, 1, 0, 1, 1, 0};
  CHECK(recompose(t).data[0] == 150);
  t.bits.assign(8, 1);
  CHECK(recompose(t).data[0] == 255);
}

TEST_CASE("recompose: plane count must be a multiple of 8") {
  BitPlaneTensor t(12, 2, 2);
  CHECK_THROWS_AS(recompose(t), Error);
}

TEST_CASE("round trip: exhaustive over all 256 values") {
  for (int v = 0; v < 256; ++v) {
    Image8 img(1, 1, 1, static_cast<std::uint8_t>(v));
    const auto planes = decompose(img);
    // direct recomposition oracle, independent of recompose()
    int acc = 0;
    for (int k = 0; k < 8; ++k) acc += planes.bits[k] << (7 - k);
    CHECK(acc == v);
    CHECK(recompose(planes) == img);
  }
}

TEST_CASE("round trip: random RGB images") {
  Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    const auto img = random_image(3, 8, 8, rng);
    const auto planes = decompose(img);
    CHECK(planes.planes == 24);
    CHECK(is_binary(planes));
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
          int acc = 0;
          for (int k = 0; k < 8; ++k) acc += planes.at(c * 8 + k, y, x) << (7 - k);
          REQUIRE(acc == img.at(c, y, x));
        }
    CHECK(recompose(planes) == img);
  }
}

TEST_CASE("flipping the MSB plane of a constant image moves every pixel by 128") {
  for (int v : {0, 37, 127, 128, 200, 255}) {
    Image8 img(3, 4, 5, static_cast<std::uint8_t>(v));
    auto planes = decompose(img);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 5; ++x) planes.at(c * 8, y, x) ^= 1;
    const auto out = recompose(planes);
    for (auto p : out.data) CHECK(std::abs(int(p) - v) == 128);
  }
}

TEST_CASE("decompose is deterministic") {
  Rng rng(3);
  const auto img = random_image(3, 6, 7, rng);
  CHECK(decompose(img) == decompose(img));
}

TEST_CASE("pack_bits: alternating 0,1 packs to 0xAAAA... with element 0 in the LSB") {
  BitPlaneTensor t(1, 1, 64, 1);
  for (int i = 0; i < 64; ++i) t.bits[i] = static_cast<std::uint8_t>(i % 2);
  const auto words = pack_bits(t);
  REQUIRE(words.size() == 1);
  CHECK(words[0] == 0xAAAAAAAAAAAAAAAAull);
  for (int i = 0; i < 64; ++i) t.bits[i] = static_cast<std::uint8_t>(1 - i % 2);
  CHECK(pack_bits(t)[0] == 0x5555555555555555ull);
}

TEST_CASE("pack_bits: empty tensor gives empty buffer") {
  BitPlaneTensor t(0, 0, 0);
  CHECK(pack_bits(t).empty());
  CHECK(unpack_bits({}, 0, 0, 0).bits.empty());
}

TEST_CASE("pack/unpack: random lengths round trip") {
  Rng rng(11);
  for (int len : {1, 33, 63, 64, 65, 200}) {
    auto t = random_bits(1, 1, len, rng, 1);
    const auto words = pack_bits(t);
    CHECK(words.size() == static_cast<std::size_t>((len + 63) / 64));
    CHECK(unpack_bits(words, 1, 1, len, 1) == t);
  }
}

TEST_CASE("unpack: inconsistent buffer is rejected") {
  std::vector<std::uint64_t> words(2, 0);
  CHECK_THROWS_AS(unpack_bits(words, 1, 1, 33), Error);
}

TEST_CASE("packed-plane file round trip and header layout") {
  bdpm::testing::TempDir dir("packed");
  Rng rng(5);
  const auto planes = decompose(random_image(3, 5, 7, rng));
  const auto path = dir.path() / "x.bp";
  write_packed_planes(path, planes);
  CHECK(read_packed_planes(path) == planes);

  std::ifstream in(path, std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), {});
  REQUIRE(bytes.size() == 8 + 16 + 8 * ((3 * 8 * 5 * 7 + 63) / 64));
  CHECK(std::string(bytes.data(), 8) == "BDPM-BP1");
  std::uint32_t hdr[4];
  std::memcpy(hdr, bytes.data() + 8, 16);
  CHECK(hdr[0] == 3);
  CHECK(hdr[1] == 8);
  CHECK(hdr[2] == 5);
  CHECK(hdr[3] == 7);
}

TEST_CASE("packed-plane file: truncation is detected") {
  bdpm::testing::TempDir dir("packed_trunc");
  Rng rng(5);
  const auto path = dir.path() / "x.bp";
  write_packed_planes(path, decompose(random_image(1, 9, 9, rng)));
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
  CHECK_THROWS_AS(read_packed_planes(path), Error);
}

TEST_CASE("PNM: P5 and P6 round trip bit-exactly") {
  bdpm::testing::TempDir dir("pnm");
  Rng rng(9);
  for (int c : {1, 3}) {
    const auto img = random_image(c, 6, 11, rng);
    const auto path = dir.path() / (c == 1 ? "a.pgm" : "a.ppm");
    write_pnm(path, img);
    CHECK(read_pnm(path) == img);
  }
}

TEST_CASE("PNM: header comments are skipped; raster is pixel-interleaved") {
  bdpm::testing::TempDir dir("pnm_hdr");
  const auto path = dir.path() / "c.ppm";
  {
    std::ofstream out(path, std::ios::binary);
    out << "P6\n# comment\n2 1\n255\n";
    const unsigned char px[] = {1, 2, 3, 4, 5, 6};
    out.write(reinterpret_cast<const char*>(px), 6);
  }
  const auto img = read_pnm(path);
  CHECK(img.channels == 3);
  CHECK(img.at(0, 0, 0) == 1);
  CHECK(img.at(1, 0, 0) == 2);
  CHECK(img.at(2, 0, 1) == 6);
}

TEST_CASE("PNM: unsupported formats are rejected") {
  bdpm::testing::TempDir dir("pnm_bad");
  const auto path = dir.path() / "bad.pgm";
  {
    std::ofstream out(path, std::ios::binary);
    out << "P5\n2 2\n65535\n";
  }
  CHECK_THROWS_AS(read_pnm(path), Error);
  CHECK_THROWS_AS(read_pnm(dir.path() / "missing.pgm"), Error);
}
