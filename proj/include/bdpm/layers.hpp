#pragma once

#include <algorithm>
#include <cmath>

#include "bdpm/tensor.hpp"

namespace bdpm::layers {

/// Unfolds 3x3 zero-padded neighbourhoods: row (c*9 + ky*3 + kx), column (y*w + x).
template <typename Scalar>
MatrixR<Scalar> im2col3x3(const MatrixR<Scalar>& in, int h, int w) {
  const Eigen::Index channels = in.rows();
  MatrixR<Scalar> col(channels * 9, static_cast<Eigen::Index>(h) * w);
  for (Eigen::Index c = 0; c < channels; ++c) {
    const Scalar* src = in.row(c).data();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        Scalar* dst = col.row(c * 9 + ky * 3 + kx).data();
        const int dy = ky - 1;
        const int dx = kx - 1;
        for (int y = 0; y < h; ++y) {
          Scalar* d = dst + y * w;
          const int sy = y + dy;
          if (sy < 0 || sy >= h) {
            std::fill(d, d + w, Scalar(0));
            continue;
          }
          const Scalar* s = src + sy * w;
          if (dx < 0) {
            d[0] = Scalar(0);
            std::copy(s, s + w - 1, d + 1);
          } else if (dx > 0) {
            std::copy(s + 1, s + w, d);
            d[w - 1] = Scalar(0);
          } else {
            std::copy(s, s + w, d);
          }
        }
      }
    }
  }
  return col;
}

/// Adjoint of im2col3x3: scatters column gradients back onto the input map.
template <typename Scalar>
MatrixR<Scalar> col2im3x3(const MatrixR<Scalar>& col, Eigen::Index channels, int h, int w) {
  MatrixR<Scalar> out = MatrixR<Scalar>::Zero(channels, static_cast<Eigen::Index>(h) * w);
  for (Eigen::Index c = 0; c < channels; ++c) {
    Scalar* dst = out.row(c).data();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const Scalar* src = col.row(c * 9 + ky * 3 + kx).data();
        const int dy = ky - 1;
        const int dx = kx - 1;
        const int x0 = dx < 0 ? 1 : 0;
        const int x1 = dx > 0 ? w - 1 : w;
        for (int y = 0; y < h; ++y) {
          const int sy = y + dy;
          if (sy < 0 || sy >= h) continue;
          Scalar* d = dst + sy * w + dx;
          const Scalar* s = src + y * w;
          for (int x = x0; x < x1; ++x) d[x] += s[x];
        }
      }
    }
  }
  return out;
}

/// 2x2 mean pooling; h and w must be even.
template <typename Scalar>
MatrixR<Scalar> avg_pool2(const MatrixR<Scalar>& in, int h, int w) {
  const int oh = h / 2;
  const int ow = w / 2;
  MatrixR<Scalar> out(in.rows(), static_cast<Eigen::Index>(oh) * ow);
  for (Eigen::Index c = 0; c < in.rows(); ++c) {
    const Scalar* s = in.row(c).data();
    Scalar* d = out.row(c).data();
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        const Scalar* p = s + 2 * y * w + 2 * x;
        d[y * ow + x] = Scalar(0.25) * (p[0] + p[1] + p[w] + p[w + 1]);
      }
  }
  return out;
}

template <typename Scalar>
MatrixR<Scalar> avg_pool2_backward(const MatrixR<Scalar>& dout, int h, int w) {
  const int oh = h / 2;
  const int ow = w / 2;
  MatrixR<Scalar> din(dout.rows(), static_cast<Eigen::Index>(h) * w);
  for (Eigen::Index c = 0; c < dout.rows(); ++c) {
    const Scalar* s = dout.row(c).data();
    Scalar* d = din.row(c).data();
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) d[y * w + x] = Scalar(0.25) * s[(y / 2) * ow + x / 2];
  }
  (void)oh;
  return din;
}

/// Nearest-neighbour 2x upsampling from (h, w) to (2h, 2w).
template <typename Scalar>
MatrixR<Scalar> upsample2(const MatrixR<Scalar>& in, int h, int w) {
  const int oh = 2 * h;
  const int ow = 2 * w;
  MatrixR<Scalar> out(in.rows(), static_cast<Eigen::Index>(oh) * ow);
  for (Eigen::Index c = 0; c < in.rows(); ++c) {
    const Scalar* s = in.row(c).data();
    Scalar* d = out.row(c).data();
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) d[y * ow + x] = s[(y / 2) * w + x / 2];
  }
  return out;
}

template <typename Scalar>
MatrixR<Scalar> upsample2_backward(const MatrixR<Scalar>& dout, int h, int w) {
  const int ow = 2 * w;
  MatrixR<Scalar> din = MatrixR<Scalar>::Zero(dout.rows(), static_cast<Eigen::Index>(h) * w);
  for (Eigen::Index c = 0; c < dout.rows(); ++c) {
    const Scalar* s = dout.row(c).data();
    Scalar* d = din.row(c).data();
    for (int y = 0; y < 2 * h; ++y)
      for (int x = 0; x < ow; ++x) d[(y / 2) * w + x / 2] += s[y * ow + x];
  }
  return din;
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  return Scalar(1) / (Scalar(1) + std::exp(-x));
}

/// x * sigmoid(x), elementwise.
template <typename Derived>
auto silu(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return x.unaryExpr([](Scalar v) { return v * sigmoid(v); });
}

/// d/dx of silu, elementwise.
template <typename Derived>
auto silu_grad(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return x.unaryExpr([](Scalar v) {
    const Scalar s = sigmoid(v);
    return s * (Scalar(1) + v * (Scalar(1) - s));
  });
}

}  // namespace bdpm::layers
