#include "bdpm/loss.hpp"

namespace bdpm {

std::vector<double> plane_weights(int planes_per_channel) {
  require(planes_per_channel >= 1, ErrorKind::kInvalidArgument, "plane_weights: need at least one plane");
  if (planes_per_channel == 1) return {1.0};
  std::vector<double> w(static_cast<std::size_t>(planes_per_channel));
  for (int k = 0; k < planes_per_channel; ++k) w[k] = 1.0 - 0.9 * k / (planes_per_channel - 1);
  return w;
}

LossWeights LossWeights::linear(int channels, int bit_depth) {
  require(channels >= 1, ErrorKind::kInvalidArgument, "LossWeights: need at least one channel");
  const auto per = plane_weights(bit_depth);
  LossWeights lw;
  for (int c = 0; c < channels; ++c) lw.planes.insert(lw.planes.end(), per.begin(), per.end());
  lw.noise.assign(lw.planes.size(), 1.0);
  return lw;
}

LossWeights LossWeights::constant(int planes) {
  LossWeights lw;
  lw.planes.assign(static_cast<std::size_t>(planes), 1.0);
  lw.noise.assign(static_cast<std::size_t>(planes), 1.0);
  return lw;
}

LossWeights LossWeights::for_data_planes(int planes) {
  if (planes > 0 && planes % 8 == 0) return linear(planes / 8, 8);
  return constant(planes);
}

}  // namespace bdpm
