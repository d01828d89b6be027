#include "bdpm/pnm.hpp"

#include <cctype>
#include <string>

#include "bdpm/binio.hpp"
#include "bdpm/fileio.hpp"

namespace bdpm {

namespace {

// Header tokens are separated by whitespace; '#' starts a comment running to end of line.
class HeaderScanner {
 public:
  explicit HeaderScanner(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::string token() {
    skip_space_and_comments();
    std::string tok;
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_]) && bytes_[pos_] != '#') tok.push_back(char(bytes_[pos_++]));
    require(!tok.empty(), ErrorKind::kCorruptFile, "pnm: truncated header");
    return tok;
  }

  int integer() {
    const auto tok = token();
    for (char ch : tok) require(std::isdigit(static_cast<unsigned char>(ch)), ErrorKind::kCorruptFile, "pnm: bad number");
    require(tok.size() < 8, ErrorKind::kCorruptFile, "pnm: number too large");
    return std::stoi(tok);
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_offset() {
    require(pos_ < bytes_.size() && std::isspace(bytes_[pos_]), ErrorKind::kCorruptFile, "pnm: missing raster separator");
    return pos_ + 1;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Image8 read_pnm(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  HeaderScanner scan(bytes);
  const auto magic = scan.token();
  require(magic == "P5" || magic == "P6", ErrorKind::kCorruptFile, "pnm: unsupported magic '" + magic + "' in " + path.string());
  const int channels = magic == "P5" ? 1 : 3;
  const int width = scan.integer();
  const int height = scan.integer();
  const int maxval = scan.integer();
  require(width >= 1 && height >= 1, ErrorKind::kCorruptFile, "pnm: empty image");
  require(maxval == 255, ErrorKind::kCorruptFile, "pnm: only maxval 255 is supported");
  const std::size_t offset = scan.raster_offset();
  const std::size_t count = static_cast<std::size_t>(width) * height * channels;
  require(bytes.size() >= offset + count, ErrorKind::kCorruptFile, "pnm: truncated raster in " + path.string());

  // PNM rasters are pixel-interleaved; Image8 is channel-major.
  Image8 img(channels, height, width);
  const std::uint8_t* src = bytes.data() + offset;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < channels; ++c) img.at(c, y, x) = *src++;
  return img;
}

void write_pnm(const std::filesystem::path& path, const Image8& image) {
  require(image.channels == 1 || image.channels == 3, ErrorKind::kInvalidArgument, "pnm: channels must be 1 or 3");
  binio::Writer w;
  w.str(image.channels == 1 ? "P5\n" : "P6\n");
  w.str(std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n");
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < image.channels; ++c) w.pod(image.at(c, y, x));
  write_file_atomic(path, w.buffer());
}

}  // namespace bdpm
