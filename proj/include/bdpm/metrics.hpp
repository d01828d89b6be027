#pragma once

#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "bdpm/image.hpp"

namespace bdpm {

/// PSNR cap written to CSV when the images are identical.
inline constexpr double kPsnrCap = 99.0;

/// 10 log10(255^2 / MSE) with the MSE taken jointly over all channels;
/// +infinity for identical images.
double psnr(const Image8& a, const Image8& b);

/// Mean local SSIM over every window x window placement (stride 1), uniform
/// weights, population statistics, C1 = (k1 255)^2, C2 = (k2 255)^2.
/// RGB images are compared on Rec. 601 luma.
double ssim(const Image8& a, const Image8& b, int window = 8, double k1 = 0.01, double k2 = 0.03);

/// Hamming distance divided by plane size, for every plane.
std::vector<double> bit_error_rate(const BitPlaneTensor& a, const BitPlaneTensor& b);

/// BER per plane restricted to pixels where `region` (one plane) is 1.
std::vector<double> bit_error_rate(const BitPlaneTensor& a, const BitPlaneTensor& b, const BitPlaneTensor& region);

struct EvalRow {
  std::string id;
  double psnr = 0.0;
  double ssim = 0.0;
  std::vector<double> ber;         // per plane
  std::vector<double> masked_ber;  // per plane inside the mask; empty without one
};

struct EvalReport {
  std::vector<EvalRow> rows;  // sorted by id
  double mean_psnr = 0.0;     // arithmetic mean of per-image PSNR (capped)
  double mean_ssim = 0.0;
  std::vector<double> mean_ber;
  std::vector<double> mean_masked_ber;
  double wallclock_seconds = 0.0;
  int steps = 0;

  /// Sorts rows by id and recomputes every mean from them.
  void finalize();
};

/// Metrics of one prediction; with `region` the masked-region BER is filled too.
EvalRow evaluate_pair(const std::string& id, const Image8& prediction, const Image8& truth,
                      const BitPlaneTensor* region = nullptr);

/// CSV: id,psnr,ssim,ber_p00,...[,mber_p00,...]; the last line is the "mean" row.
void write_eval_csv(const std::filesystem::path& path, const EvalReport& report);

}  // namespace bdpm
