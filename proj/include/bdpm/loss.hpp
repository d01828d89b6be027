#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "bdpm/error.hpp"
#include "bdpm/image.hpp"
#include "bdpm/tensor.hpp"

namespace bdpm {

/// Linear per-plane weights for one channel, MSB first: 1.0 down to 0.1.
std::vector<double> plane_weights(int planes_per_channel);

/// Loss weights for the clean-bit term (tiled per channel) and the noise term.
struct LossWeights {
  std::vector<double> planes;  // x0 term
  std::vector<double> noise;   // z term, constant 1

  /// Linear image weights tiled over `channels`, unit noise weights.
  static LossWeights linear(int channels, int bit_depth = 8);
  static LossWeights constant(int planes);
  /// Linear weights for whole 8-bit channels, constant otherwise.
  static LossWeights for_data_planes(int planes);
};

/// Numerically stable per-element BCE from a logit: max(l, 0) - l*y + log(1 + exp(-|l|)).
template <typename Scalar>
Scalar bce_with_logit(Scalar logit, Scalar target) {
  using std::abs;
  using std::exp;
  using std::log1p;
  return (logit > Scalar(0) ? logit : Scalar(0)) - logit * target + log1p(exp(-abs(logit)));
}

template <typename Scalar>
struct LossResult {
  double total = 0.0;   // loss_x + loss_z
  double loss_x = 0.0;
  double loss_z = 0.0;
  MatrixR<Scalar> d_x0;  // d total / d x0 logits
  MatrixR<Scalar> d_z;   // d total / d z logits
};

namespace detail {

// Weighted mean over planes of the per-plane mean BCE, plus its logit gradient.
template <typename Scalar>
double weighted_plane_bce(const MatrixR<Scalar>& logits, const BitPlaneTensor& target,
                          const std::vector<double>& weights, MatrixR<Scalar>& grad) {
  const Eigen::Index planes = logits.rows();
  const Eigen::Index hw = logits.cols();
  require(target.planes == planes && static_cast<Eigen::Index>(target.plane_size()) == hw,
          ErrorKind::kShapeMismatch, "bce_loss: logits and target shapes differ");
  require(static_cast<Eigen::Index>(weights.size()) == planes, ErrorKind::kShapeMismatch,
          "bce_loss: weight vector length " + std::to_string(weights.size()) + " != plane count " +
              std::to_string(planes));
  double wsum = 0.0;
  for (double w : weights) wsum += w;
  require(wsum > 0.0, ErrorKind::kInvalidArgument, "bce_loss: weights sum to zero");

  grad.resize(planes, hw);
  double total = 0.0;
  for (Eigen::Index p = 0; p < planes; ++p) {
    const std::uint8_t* y = target.bits.data() + p * hw;
    const double scale = weights[p] / (wsum * static_cast<double>(hw));
    double plane_sum = 0.0;
    for (Eigen::Index i = 0; i < hw; ++i) {
      const Scalar l = logits(p, i);
      require(std::isfinite(static_cast<double>(l)), ErrorKind::kNumeric,
              "bce_loss: non-finite logit at plane " + std::to_string(p) + ", pixel " + std::to_string(i));
      require(y[i] <= 1, ErrorKind::kInvalidArgument, "bce_loss: target is not binary");
      const Scalar t = y[i] ? Scalar(1) : Scalar(0);
      plane_sum += static_cast<double>(bce_with_logit(l, t));
      const Scalar s = Scalar(1) / (Scalar(1) + std::exp(-l));
      grad(p, i) = static_cast<Scalar>(scale) * (s - t);
    }
    total += weights[p] * plane_sum / static_cast<double>(hw);
  }
  return total / wsum;
}

}  // namespace detail

/// Per-example objective L_x + L_z. Each term averages BCE over the pixels of a
/// plane, then takes the weight-normalized mean over planes, so unit weights
/// give plain mean BCE. Gradients are with respect to the logits.
template <typename Scalar>
LossResult<Scalar> bce_loss(const MatrixR<Scalar>& x0_logits, const MatrixR<Scalar>& z_logits,
                            const BitPlaneTensor& x0_target, const BitPlaneTensor& z_target,
                            const LossWeights& weights) {
  LossResult<Scalar> r;
  r.loss_x = detail::weighted_plane_bce(x0_logits, x0_target, weights.planes, r.d_x0);
  r.loss_z = detail::weighted_plane_bce(z_logits, z_target, weights.noise, r.d_z);
  r.total = r.loss_x + r.loss_z;
  return r;
}

}  // namespace bdpm
