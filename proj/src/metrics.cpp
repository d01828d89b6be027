#include "bdpm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "bdpm/bitplane.hpp"
#include "bdpm/imageops.hpp"

namespace bdpm {

double psnr(const Image8& a, const Image8& b) {
  require(a.same_shape(b), ErrorKind::kShapeMismatch, "psnr: image shapes differ");
  double sse = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    sse += d * d;
  }
  if (sse == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = sse / static_cast<double>(a.data.size());
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double ssim(const Image8& a, const Image8& b, int window, double k1, double k2) {
  require(a.same_shape(b), ErrorKind::kShapeMismatch, "ssim: image shapes differ");
  require(window >= 1 && window <= std::min(a.height, a.width), ErrorKind::kInvalidArgument,
          "ssim: window larger than image");
  const auto la = luma(a);
  const auto lb = luma(b);
  const double c1 = (k1 * 255.0) * (k1 * 255.0);
  const double c2 = (k2 * 255.0) * (k2 * 255.0);
  const double n = static_cast<double>(window) * window;
  const int w = a.width;
  double total = 0.0;
  int count = 0;
  for (int y0 = 0; y0 + window <= a.height; ++y0)
    for (int x0 = 0; x0 + window <= a.width; ++x0) {
      double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
      for (int y = y0; y < y0 + window; ++y)
        for (int x = x0; x < x0 + window; ++x) {
          const double va = la[y * w + x];
          const double vb = lb[y * w + x];
          sa += va;
          sb += vb;
          saa += va * va;
          sbb += vb * vb;
          sab += va * vb;
        }
      const double ma = sa / n;
      const double mb = sb / n;
      const double va = saa / n - ma * ma;
      const double vb = sbb / n - mb * mb;
      const double cov = sab / n - ma * mb;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  return total / count;
}

std::vector<double> bit_error_rate(const BitPlaneTensor& a, const BitPlaneTensor& b) {
  require(a.same_shape(b), ErrorKind::kShapeMismatch, "bit_error_rate: tensor shapes differ");
  const std::size_t hw = a.plane_size();
  std::vector<double> out(static_cast<std::size_t>(a.planes), 0.0);
  for (int p = 0; p < a.planes; ++p) {
    std::size_t diff = 0;
    for (std::size_t i = 0; i < hw; ++i) diff += a.bits[p * hw + i] != b.bits[p * hw + i];
    out[p] = hw ? static_cast<double>(diff) / hw : 0.0;
  }
  return out;
}

std::vector<double> bit_error_rate(const BitPlaneTensor& a, const BitPlaneTensor& b, const BitPlaneTensor& region) {
  require(a.same_shape(b), ErrorKind::kShapeMismatch, "bit_error_rate: tensor shapes differ");
  require(region.planes == 1 && region.height == a.height && region.width == a.width, ErrorKind::kShapeMismatch,
          "bit_error_rate: region must be one plane of the same size");
  const std::size_t hw = a.plane_size();
  const auto n = static_cast<std::size_t>(std::count(region.bits.begin(), region.bits.end(), 1));
  std::vector<double> out(static_cast<std::size_t>(a.planes), 0.0);
  if (n == 0) return out;
  for (int p = 0; p < a.planes; ++p) {
    std::size_t diff = 0;
    for (std::size_t i = 0; i < hw; ++i)
      if (region.bits[i]) diff += a.bits[p * hw + i] != b.bits[p * hw + i];
    out[p] = static_cast<double>(diff) / n;
  }
  return out;
}

EvalRow evaluate_pair(const std::string& id, const Image8& prediction, const Image8& truth,
                      const BitPlaneTensor* region) {
  EvalRow row;
  row.id = id;
  row.psnr = std::min(psnr(prediction, truth), kPsnrCap);
  const int window = std::min({8, truth.height, truth.width});
  row.ssim = ssim(prediction, truth, window);
  const auto pa = decompose(prediction);
  const auto pb = decompose(truth);
  row.ber = bit_error_rate(pa, pb);
  if (region) row.masked_ber = bit_error_rate(pa, pb, *region);
  return row;
}

void EvalReport::finalize() {
  std::sort(rows.begin(), rows.end(), [](const EvalRow& a, const EvalRow& b) { return a.id < b.id; });
  mean_psnr = mean_ssim = 0.0;
  mean_ber.assign(rows.empty() ? 0 : rows.front().ber.size(), 0.0);
  mean_masked_ber.assign(rows.empty() ? 0 : rows.front().masked_ber.size(), 0.0);
  if (rows.empty()) return;
  for (const auto& r : rows) {
    mean_psnr += r.psnr;
    mean_ssim += r.ssim;
    require(r.ber.size() == mean_ber.size() && r.masked_ber.size() == mean_masked_ber.size(), ErrorKind::kInvariant,
            "eval: rows have differing plane counts");
    for (std::size_t p = 0; p < r.ber.size(); ++p) mean_ber[p] += r.ber[p];
    for (std::size_t p = 0; p < r.masked_ber.size(); ++p) mean_masked_ber[p] += r.masked_ber[p];
  }
  const double n = static_cast<double>(rows.size());
  mean_psnr /= n;
  mean_ssim /= n;
  for (auto& v : mean_ber) v /= n;
  for (auto& v : mean_masked_ber) v /= n;
}

void write_eval_csv(const std::filesystem::path& path, const EvalReport& report) {
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::kIo, "eval: cannot write " + path.string());
  out << "id,psnr,ssim";
  for (std::size_t p = 0; p < report.mean_ber.size(); ++p) out << ",ber_p" << std::setw(2) << std::setfill('0') << p;
  for (std::size_t p = 0; p < report.mean_masked_ber.size(); ++p)
    out << ",mber_p" << std::setw(2) << std::setfill('0') << p;
  out << std::setfill(' ') << '\n' << std::setprecision(10);
  auto line = [&](const std::string& id, double ps, double ss, const std::vector<double>& ber,
                  const std::vector<double>& mber) {
    out << id << ',' << ps << ',' << ss;
    for (double v : ber) out << ',' << v;
    for (double v : mber) out << ',' << v;
    out << '\n';
  };
  for (const auto& r : report.rows) line(r.id, r.psnr, r.ssim, r.ber, r.masked_ber);
  line("mean", report.mean_psnr, report.mean_ssim, report.mean_ber, report.mean_masked_ber);
}

}  // namespace bdpm
