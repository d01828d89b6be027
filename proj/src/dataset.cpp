#include "bdpm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "bdpm/bitplane.hpp"
#include "bdpm/imageops.hpp"
#include "bdpm/pnm.hpp"

namespace bdpm {

Image8 augment(const Image8& image, Rng& rng, const AugmentConfig& config) {
  require(config.crop_min >= 0.8 && config.crop_min <= config.crop_max && config.crop_max <= 1.0,
          ErrorKind::kInvalidArgument, "augment: crop fractions must lie in [0.8, 1.0]");
  const double fy = rng.uniform(config.crop_min, config.crop_max);
  const double fx = rng.uniform(config.crop_min, config.crop_max);
  const int ch = std::clamp(static_cast<int>(std::lround(fy * image.height)), 1, image.height);
  const int cw = std::clamp(static_cast<int>(std::lround(fx * image.width)), 1, image.width);
  const int y0 = static_cast<int>(rng.uniform_int(0, image.height - ch));
  const int x0 = static_cast<int>(rng.uniform_int(0, image.width - cw));
  Image8 out = resize_bilinear(crop(image, y0, x0, ch, cw), image.height, image.width);
  if (config.flip && rng.bernoulli(0.5)) out = flip_horizontal(out);
  return out;
}

std::string to_string(SynthKind kind) {
  switch (kind) {
    case SynthKind::kGradient: return "gradient";
    case SynthKind::kDisc: return "disc";
    case SynthKind::kChecker: return "checker";
    case SynthKind::kNoise: return "noise";
    case SynthKind::kMixed: return "mixed";
  }
  return "?";
}

SynthKind parse_synth_kind(const std::string& name) {
  for (auto k : {SynthKind::kGradient, SynthKind::kDisc, SynthKind::kChecker, SynthKind::kNoise, SynthKind::kMixed})
    if (to_string(k) == name) return k;
  fail(ErrorKind::kConfig, "unknown synthetic dataset kind '" + name + "'");
}

namespace {

std::uint8_t to_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0)); }

void fill_gradient(Image8& img, Rng& rng, ManifestRecord& rec) {
  const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double ux = std::cos(theta);
  const double uy = std::sin(theta);
  // Project pixel centres onto the direction and normalize to [0, 1].
  double lo = 1e9, hi = -1e9;
  for (int y : {0, img.height - 1})
    for (int x : {0, img.width - 1}) {
      const double p = (x + 0.5) * ux + (y + 0.5) * uy;
      lo = std::min(lo, p);
      hi = std::max(hi, p);
    }
  std::vector<double> c0(img.channels), c1(img.channels);
  for (int c = 0; c < img.channels; ++c) {
    c0[c] = rng.uniform(0.0, 255.0);
    c1[c] = rng.uniform(0.0, 255.0);
  }
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        const double s = ((x + 0.5) * ux + (y + 0.5) * uy - lo) / std::max(1e-9, hi - lo);
        img.at(c, y, x) = to_u8(c0[c] + s * (c1[c] - c0[c]));
      }
  rec.fields["theta"] = format_double(theta);
}

void fill_disc(Image8& img, Rng& rng, ManifestRecord& rec) {
  fill_gradient(img, rng, rec);
  const int size = std::min(img.height, img.width);
  const double r = rng.uniform(size / 8.0, size / 3.0);
  const double cx = rng.uniform(r, img.width - r);
  const double cy = rng.uniform(r, img.height - r);
  std::vector<std::uint8_t> color(img.channels);
  for (auto& v : color) v = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const double dx = x + 0.5 - cx;
      const double dy = y + 0.5 - cy;
      if (dx * dx + dy * dy <= r * r)
        for (int c = 0; c < img.channels; ++c) img.at(c, y, x) = color[c];
    }
  rec.fields["discs"] = "1";
  rec.fields["cx"] = format_double(cx);
  rec.fields["cy"] = format_double(cy);
  rec.fields["r"] = format_double(r);
  std::string col;
  for (int c = 0; c < img.channels; ++c) col += (c ? "," : "") + std::to_string(color[c]);
  rec.fields["color"] = col;
}

void fill_checker(Image8& img, Rng& rng, ManifestRecord& rec) {
  const int size = std::min(img.height, img.width);
  const int period = static_cast<int>(rng.uniform_int(2, std::max(2, size / 4)));
  const int oy = static_cast<int>(rng.uniform_int(0, 2 * period - 1));
  const int ox = static_cast<int>(rng.uniform_int(0, 2 * period - 1));
  std::vector<std::uint8_t> a(img.channels), b(img.channels);
  for (int c = 0; c < img.channels; ++c) {
    a[c] = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    b[c] = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  }
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const bool odd = (((y + oy) / period) + ((x + ox) / period)) % 2 == 1;
      for (int c = 0; c < img.channels; ++c) img.at(c, y, x) = odd ? b[c] : a[c];
    }
  rec.fields["period"] = std::to_string(period);
}

void fill_noise(Image8& img, Rng& rng, ManifestRecord& rec) {
  const int grid = static_cast<int>(rng.uniform_int(3, 6));
  Image8 coarse(img.channels, grid, grid);
  for (auto& v : coarse.data) v = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  img = resize_bilinear(coarse, img.height, img.width);
  rec.fields["grid"] = std::to_string(grid);
}

}  // namespace

std::vector<SynthImage> synth_dataset(SynthKind kind, int count, int size, int channels, std::uint64_t seed) {
  require(count >= 0 && size >= 4 && (channels == 1 || channels == 3), ErrorKind::kInvalidArgument,
          "synth_dataset: need count >= 0, size >= 4, channels in {1, 3}");
  std::vector<SynthImage> out;
  out.reserve(static_cast<std::size_t>(count));
  static constexpr SynthKind kCycle[] = {SynthKind::kGradient, SynthKind::kDisc, SynthKind::kChecker, SynthKind::kNoise};
  for (int i = 0; i < count; ++i) {
    SynthImage item;
    item.record.seed = derive_seed(seed, {static_cast<std::uint64_t>(i)});
    Rng rng(item.record.seed);
    const SynthKind k = kind == SynthKind::kMixed ? kCycle[rng.uniform_int(0, 3)] : kind;
    item.image = Image8(channels, size, size);
    item.record.fields["kind"] = to_string(k);
    item.record.fields["index"] = std::to_string(i);
    switch (k) {
      case SynthKind::kGradient: fill_gradient(item.image, rng, item.record); break;
      case SynthKind::kDisc: fill_disc(item.image, rng, item.record); break;
      case SynthKind::kChecker: fill_checker(item.image, rng, item.record); break;
      default: fill_noise(item.image, rng, item.record); break;
    }
    std::ostringstream name;
    name << "img_" << std::setw(5) << std::setfill('0') << i << (channels == 1 ? ".pgm" : ".ppm");
    item.record.path = name.str();
    out.push_back(std::move(item));
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRecord>& records) {
  std::ostringstream out;
  for (const auto& r : records) {
    require(r.path.find_first_of(" \t\n=") == std::string::npos, ErrorKind::kInvalidArgument,
            "manifest: path contains whitespace or '='");
    out << "path=" << r.path << " split=" << r.split << " seed=" << r.seed;
    for (const auto& [k, v] : r.fields) out << ' ' << k << '=' << v;
    out << '\n';
  }
  const auto text = out.str();
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(f), ErrorKind::kIo, "manifest: cannot write " + path.string());
  f << text;
}

std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path) {
  std::ifstream f(path);
  require(static_cast<bool>(f), ErrorKind::kIo, "manifest: cannot open " + path.string());
  std::vector<ManifestRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    ManifestRecord rec;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) {
      const auto eq = tok.find('=');
      require(eq != std::string::npos, ErrorKind::kConfig,
              "manifest: malformed field '" + tok + "' on line " + std::to_string(line_no));
      const auto key = tok.substr(0, eq);
      const auto value = tok.substr(eq + 1);
      if (key == "path") rec.path = value;
      else if (key == "split") rec.split = value;
      else if (key == "seed") rec.seed = std::stoull(value);
      else rec.fields[key] = value;
    }
    require(!rec.path.empty(), ErrorKind::kConfig, "manifest: line " + std::to_string(line_no) + " has no path");
    out.push_back(std::move(rec));
  }
  return out;
}

void write_dataset(const std::filesystem::path& dir, const std::vector<SynthImage>& items, const std::string& split) {
  std::filesystem::create_directories(dir);
  std::vector<ManifestRecord> records;
  for (const auto& item : items) {
    write_pnm(dir / item.record.path, item.image);
    records.push_back(item.record);
    records.back().split = split;
  }
  write_manifest(dir / "manifest.txt", records);
}

std::vector<SynthImage> load_dataset(const std::filesystem::path& manifest, const std::string& split) {
  const auto dir = manifest.parent_path();
  std::vector<SynthImage> out;
  for (auto& rec : read_manifest(manifest)) {
    if (!split.empty() && rec.split != split) continue;
    SynthImage item;
    item.image = read_pnm(dir / rec.path);
    item.record = std::move(rec);
    out.push_back(std::move(item));
  }
  return out;
}

Conditioning make_condition(const Image8& image, const TaskConfig& task, Rng& rng) {
  if (task.task == Task::kSuperResolution) return build_sr_condition(image, task.sr_factor);
  Rng mask_rng = rng.split({0x6D61736Bull});
  const MaskSpec mask = generate_mask(image.height, image.width, task.band, mask_rng);
  Rng fill_rng = rng.split({0x66696C6Cull});
  return build_inpaint_condition(image, mask, fill_rng);
}

std::vector<TrainExample> build_training_batch(const std::vector<Image8>& images, const TaskConfig& task,
                                               const AugmentConfig* augmentation, int batch_size, const Rng& step_rng) {
  require(!images.empty(), ErrorKind::kInvalidArgument, "training batch: empty dataset");
  std::vector<TrainExample> batch;
  batch.reserve(static_cast<std::size_t>(batch_size));
  for (int i = 0; i < batch_size; ++i) {
    Rng rng = step_rng.split({static_cast<std::uint64_t>(i), 0x62617463ull});
    const auto idx = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(images.size()) - 1));
    Image8 img = augmentation ? augment(images[idx], rng, *augmentation) : images[idx];
    TrainExample ex;
    ex.cond = make_condition(img, task, rng);
    ex.x0 = decompose(img);
    batch.push_back(std::move(ex));
  }
  return batch;
}

}  // namespace bdpm
