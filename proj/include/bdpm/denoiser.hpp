#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "bdpm/conditioning.hpp"
#include "bdpm/error.hpp"
#include "bdpm/image.hpp"
#include "bdpm/layers.hpp"
#include "bdpm/rng.hpp"
#include "bdpm/tensor.hpp"

namespace bdpm {

/// Architecture descriptor. Together with the fixed topology below it
/// determines every parameter shape.
///
/// Topology (level 0 = full resolution, each level halves height and width):
///
///   in0   conv  input -> width0          level 0
///   enc0  conv  width0 -> width0         level 0   (skip 0)
///   enc1a conv  width0 -> width1         level 1   (after 2x2 mean pool)
///   enc1b conv  width1 -> width1         level 1   (skip 1)
///   mid_a conv  width1 -> width1         level 2   (after 2x2 mean pool)
///   mid_b conv  width1 -> width1         level 2
///   dec1  conv  [up(mid_b), skip 1] -> width1        level 1
///   dec0  conv  [up(dec1), skip 0]  -> width0        level 0
///   out   conv  width0 -> 2 * data_planes            level 0, no activation
///
/// Every block is conv3x3 + bias + projected timestep bias, then SiLU.
struct DenoiserSpec {
  int data_planes = 24;  // channels x bit-depth of x_t
  int cond_planes = 25;  // condition planes, including a mask plane if any
  int width0 = 32;
  int width1 = 64;
  int temb_dim = 128;
  int max_timestep = 1000;

  int input_channels() const { return data_planes + cond_planes; }
  int output_channels() const { return 2 * data_planes; }
  void validate() const;
  friend bool operator==(const DenoiserSpec&, const DenoiserSpec&) = default;
};

inline void DenoiserSpec::validate() const {
  require(data_planes >= 1 && cond_planes >= 0 && width0 >= 1 && width1 >= 1, ErrorKind::kInvalidArgument,
          "denoiser spec: plane counts and widths must be positive");
  require(temb_dim >= 2 && temb_dim % 2 == 0, ErrorKind::kInvalidArgument, "denoiser spec: temb_dim must be even");
  require(max_timestep >= 1, ErrorKind::kInvalidArgument, "denoiser spec: max_timestep must be >= 1");
}

/// One named parameter tensor inside the flat parameter vector.
struct TensorInfo {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// Paired logits: first half of the output channels predicts x0, second half z_t.
template <typename Scalar>
struct DenoiserOutput {
  MatrixR<Scalar> x0_logits;  // data_planes x (height * width)
  MatrixR<Scalar> z_logits;
  int height = 0;
  int width = 0;
};

/// Sinusoidal features [sin(t w_0..w_{d/2-1}), cos(t w_0..w_{d/2-1})] with
/// w_i = 10000^(-i / (d/2)).
inline VectorX<double> timestep_embedding(int t, int dim) {
  require(dim >= 2 && dim % 2 == 0, ErrorKind::kInvalidArgument, "timestep_embedding: dim must be even");
  const int half = dim / 2;
  VectorX<double> e(dim);
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / half);
    e[i] = std::sin(t * freq);
    e[half + i] = std::cos(t * freq);
  }
  return e;
}

/// Sigmoid-and-threshold binarizer: bit = 1 iff sigmoid(logit) > threshold.
template <typename Derived>
BitPlaneTensor binarize(const Eigen::MatrixBase<Derived>& logits, int height, int width, double threshold = 0.5,
                        int bit_depth = 8) {
  require(threshold > 0.0 && threshold < 1.0, ErrorKind::kInvalidArgument, "binarize: threshold must be in (0, 1)");
  require(logits.cols() == static_cast<Eigen::Index>(height) * width, ErrorKind::kShapeMismatch,
          "binarize: logits do not match height x width");
  BitPlaneTensor out(static_cast<int>(logits.rows()), height, width, bit_depth);
  std::size_t i = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r)
    for (Eigen::Index c = 0; c < logits.cols(); ++c, ++i) {
      const double p = 1.0 / (1.0 + std::exp(-static_cast<double>(logits(r, c))));
      out.bits[i] = p > threshold ? 1 : 0;
    }
  return out;
}

template <typename Scalar>
class Denoiser {
 public:
  enum Block { kIn0, kEnc0, kEnc1a, kEnc1b, kMidA, kMidB, kDec1, kDec0, kBlockCount };
  static constexpr std::array<std::string_view, kBlockCount> kBlockNames = {
      "in0", "enc0", "enc1a", "enc1b", "mid_a", "mid_b", "dec1", "dec0"};
  static constexpr std::array<int, kBlockCount> kBlockLevel = {0, 0, 1, 1, 2, 2, 1, 0};

  struct BlockTape {
    MatrixR<Scalar> col;
    MatrixR<Scalar> pre;
  };

  /// Activations retained by forward() for backward().
  struct Tape {
    int height = 0;
    int width = 0;
    VectorX<Scalar> emb;
    VectorX<Scalar> temb_pre;
    VectorX<Scalar> temb;
    std::array<BlockTape, kBlockCount> blocks;
    MatrixR<Scalar> out_col;
  };

  explicit Denoiser(DenoiserSpec spec) : spec_(spec) {
    spec_.validate();
    layout();
    params_ = VectorX<Scalar>::Zero(static_cast<Eigen::Index>(total_));
  }

  /// Fan-in-scaled uniform hidden weights, zero biases. With `zero_output`
  /// the final conv starts at zero so every initial logit is 0.
  void initialize(std::uint64_t seed, bool zero_output = true) {
    Rng rng(seed);
    params_.setZero();
    for (const auto& info : tensors_) {
      if (info.shape.size() != 2) continue;  // biases stay zero
      const bool is_output = info.name == "out.w";
      if (is_output && zero_output) continue;
      const double fan_in = info.shape[1];
      // SiLU layers get the He bound; the linear output layer and projections the plain one.
      const bool gated = info.name.ends_with(".w") && !is_output;
      const double bound = gated ? std::sqrt(6.0 / fan_in) : std::sqrt(1.0 / fan_in);
      for (std::size_t i = 0; i < info.size; ++i)
        params_[static_cast<Eigen::Index>(info.offset + i)] = static_cast<Scalar>(rng.uniform(-bound, bound));
    }
  }

  const DenoiserSpec& spec() const { return spec_; }
  const std::vector<TensorInfo>& tensors() const { return tensors_; }
  std::size_t parameter_count() const { return total_; }
  VectorX<Scalar>& parameters() { return params_; }
  const VectorX<Scalar>& parameters() const { return params_; }

  const TensorInfo& tensor(std::string_view name) const {
    for (const auto& t : tensors_)
      if (t.name == name) return t;
    fail(ErrorKind::kInvalidArgument, "denoiser: no tensor named " + std::string(name));
  }

  template <typename Other>
  Denoiser<Other> cast() const {
    Denoiser<Other> out(spec_);
    out.parameters() = params_.template cast<Other>();
    return out;
  }

  /// Packs x_t and the condition into the (channels x h*w) input, bits mapped to {-1, +1}.
  MatrixR<Scalar> assemble_input(const BitPlaneTensor& x_t, const Conditioning& y) const {
    require(x_t.planes == spec_.data_planes, ErrorKind::kShapeMismatch,
            "denoiser: x_t has " + std::to_string(x_t.planes) + " planes, expected " +
                std::to_string(spec_.data_planes));
    require(y.plane_count() == spec_.cond_planes, ErrorKind::kShapeMismatch,
            "denoiser: condition has " + std::to_string(y.plane_count()) + " planes, expected " +
                std::to_string(spec_.cond_planes));
    require(spec_.cond_planes == 0 || (y.height() == x_t.height && y.width() == x_t.width),
            ErrorKind::kShapeMismatch, "denoiser: x_t and condition spatial shapes differ");
    require(!y.mask || (y.mask->height == x_t.height && y.mask->width == x_t.width), ErrorKind::kShapeMismatch,
            "denoiser: mask spatial shape differs from x_t");
    require(x_t.height % 4 == 0 && x_t.width % 4 == 0 && x_t.height > 0 && x_t.width > 0,
            ErrorKind::kShapeMismatch, "denoiser: height and width must be positive multiples of 4");

    const Eigen::Index hw = static_cast<Eigen::Index>(x_t.plane_size());
    MatrixR<Scalar> in(spec_.input_channels(), hw);
    Eigen::Index row = 0;
    auto put = [&](const BitPlaneTensor& t) {
      for (int p = 0; p < t.planes; ++p, ++row) {
        const std::uint8_t* src = t.bits.data() + static_cast<std::size_t>(p) * hw;
        Scalar* dst = in.row(row).data();
        for (Eigen::Index i = 0; i < hw; ++i) dst[i] = src[i] ? Scalar(1) : Scalar(-1);
      }
    };
    put(x_t);
    if (spec_.cond_planes > 0) {
      put(y.planes);
      if (y.mask) put(*y.mask);
    }
    return in;
  }

  DenoiserOutput<Scalar> forward(const BitPlaneTensor& x_t, int t, const Conditioning& y, Tape* tape = nullptr) const {
    require(t >= 0 && t <= spec_.max_timestep, ErrorKind::kInvalidArgument,
            "denoiser: timestep " + std::to_string(t) + " out of range");
    Tape local;
    Tape& tp = tape ? *tape : local;
    const int h = x_t.height;
    const int w = x_t.width;
    tp.height = h;
    tp.width = w;

    tp.emb = timestep_embedding(t, spec_.temb_dim).template cast<Scalar>();
    tp.temb_pre = weight("temb.w") * tp.emb + vec("temb.b");
    tp.temb = layers::silu(tp.temb_pre);

    const MatrixR<Scalar> input = assemble_input(x_t, y);
    const MatrixR<Scalar> a0 = block_forward(kIn0, input, h, w, tp);
    const MatrixR<Scalar> s0 = block_forward(kEnc0, a0, h, w, tp);
    const MatrixR<Scalar> a1 = block_forward(kEnc1a, layers::avg_pool2(s0, h, w), h / 2, w / 2, tp);
    const MatrixR<Scalar> s1 = block_forward(kEnc1b, a1, h / 2, w / 2, tp);
    MatrixR<Scalar> m = block_forward(kMidA, layers::avg_pool2(s1, h / 2, w / 2), h / 4, w / 4, tp);
    m = block_forward(kMidB, m, h / 4, w / 4, tp);

    MatrixR<Scalar> cat1(spec_.width1 * 2, s1.cols());
    cat1 << layers::upsample2(m, h / 4, w / 4), s1;
    const MatrixR<Scalar> d1 = block_forward(kDec1, cat1, h / 2, w / 2, tp);

    MatrixR<Scalar> cat0(spec_.width1 + spec_.width0, s0.cols());
    cat0 << layers::upsample2(d1, h / 2, w / 2), s0;
    const MatrixR<Scalar> d0 = block_forward(kDec0, cat0, h, w, tp);

    tp.out_col = layers::im2col3x3(d0, h, w);
    MatrixR<Scalar> logits = weight("out.w") * tp.out_col;
    logits.colwise() += vec("out.b");

    DenoiserOutput<Scalar> out;
    out.height = h;
    out.width = w;
    out.x0_logits = logits.topRows(spec_.data_planes);
    out.z_logits = logits.bottomRows(spec_.data_planes);
    return out;
  }

  DenoiserOutput<Scalar> predict(const BitPlaneTensor& x_t, int t, const Conditioning& y) const {
    return forward(x_t, t, y, nullptr);
  }

  /// Accumulates d(loss)/d(params) into `grad` given the logit gradients of the taped forward pass.
  void backward(const Tape& tp, const MatrixR<Scalar>& dx0, const MatrixR<Scalar>& dz, VectorX<Scalar>& grad) const {
    require(grad.size() == params_.size(), ErrorKind::kShapeMismatch, "backward: gradient vector has wrong size");
    const int h = tp.height;
    const int w = tp.width;
    const Eigen::Index hw = static_cast<Eigen::Index>(h) * w;
    require(dx0.rows() == spec_.data_planes && dz.rows() == spec_.data_planes && dx0.cols() == hw && dz.cols() == hw,
            ErrorKind::kShapeMismatch, "backward: logit gradient shape mismatch");

    MatrixR<Scalar> dlogits(spec_.output_channels(), hw);
    dlogits << dx0, dz;
    grad_weight(grad, "out.w").noalias() += dlogits * tp.out_col.transpose();
    grad_vec(grad, "out.b") += dlogits.rowwise().sum();
    MatrixR<Scalar> dcol = weight("out.w").transpose() * dlogits;
    MatrixR<Scalar> dd0 = layers::col2im3x3(dcol, spec_.width0, h, w);

    VectorX<Scalar> dtemb = VectorX<Scalar>::Zero(spec_.temb_dim);

    MatrixR<Scalar> dcat0 = block_backward(kDec0, dd0, h, w, tp, dtemb, grad, true);
    MatrixR<Scalar> ds0 = dcat0.bottomRows(spec_.width0);
    MatrixR<Scalar> dd1 = layers::upsample2_backward(MatrixR<Scalar>(dcat0.topRows(spec_.width1)), h / 2, w / 2);

    MatrixR<Scalar> dcat1 = block_backward(kDec1, dd1, h / 2, w / 2, tp, dtemb, grad, true);
    MatrixR<Scalar> ds1 = dcat1.bottomRows(spec_.width1);
    MatrixR<Scalar> dm = layers::upsample2_backward(MatrixR<Scalar>(dcat1.topRows(spec_.width1)), h / 4, w / 4);

    dm = block_backward(kMidB, dm, h / 4, w / 4, tp, dtemb, grad, true);
    dm = block_backward(kMidA, dm, h / 4, w / 4, tp, dtemb, grad, true);
    ds1 += layers::avg_pool2_backward(dm, h / 2, w / 2);

    MatrixR<Scalar> da1 = block_backward(kEnc1b, ds1, h / 2, w / 2, tp, dtemb, grad, true);
    MatrixR<Scalar> dp0 = block_backward(kEnc1a, da1, h / 2, w / 2, tp, dtemb, grad, true);
    ds0 += layers::avg_pool2_backward(dp0, h, w);

    MatrixR<Scalar> da0 = block_backward(kEnc0, ds0, h, w, tp, dtemb, grad, true);
    block_backward(kIn0, da0, h, w, tp, dtemb, grad, false);

    const VectorX<Scalar> dtemb_pre = dtemb.cwiseProduct(layers::silu_grad(tp.temb_pre));
    grad_weight(grad, "temb.w").noalias() += dtemb_pre * tp.emb.transpose();
    grad_vec(grad, "temb.b") += dtemb_pre;
  }

  /// (in, out) channel counts of a block.
  std::pair<int, int> block_channels(int b) const {
    const int w0 = spec_.width0;
    const int w1 = spec_.width1;
    switch (b) {
      case kIn0: return {spec_.input_channels(), w0};
      case kEnc0: return {w0, w0};
      case kEnc1a: return {w0, w1};
      case kEnc1b:
      case kMidA:
      case kMidB: return {w1, w1};
      case kDec1: return {2 * w1, w1};
      case kDec0: return {w1 + w0, w0};
      default: fail(ErrorKind::kInvalidArgument, "denoiser: bad block index");
    }
  }

 private:
  void layout() {
    tensors_.clear();
    total_ = 0;
    auto add = [&](std::string name, std::vector<int> shape) {
      std::size_t n = 1;
      for (int d : shape) n *= static_cast<std::size_t>(d);
      tensors_.push_back({std::move(name), std::move(shape), total_, n});
      total_ += n;
    };
    const int d = spec_.temb_dim;
    add("temb.w", {d, d});
    add("temb.b", {d});
    for (int b = 0; b < kBlockCount; ++b) {
      const auto [cin, cout] = block_channels(b);
      const std::string base(kBlockNames[b]);
      add(base + ".w", {cout, cin * 9});
      add(base + ".b", {cout});
      add(base + ".t", {cout, d});
    }
    add("out.w", {spec_.output_channels(), spec_.width0 * 9});
    add("out.b", {spec_.output_channels()});
  }

  ConstMapMatrixR<Scalar> weight(std::string_view name) const {
    const auto& t = tensor(name);
    return ConstMapMatrixR<Scalar>(params_.data() + t.offset, t.shape[0], t.shape[1]);
  }
  Eigen::Map<const VectorX<Scalar>> vec(std::string_view name) const {
    const auto& t = tensor(name);
    return Eigen::Map<const VectorX<Scalar>>(params_.data() + t.offset, static_cast<Eigen::Index>(t.size));
  }
  MapMatrixR<Scalar> grad_weight(VectorX<Scalar>& g, std::string_view name) const {
    const auto& t = tensor(name);
    return MapMatrixR<Scalar>(g.data() + t.offset, t.shape[0], t.shape[1]);
  }
  Eigen::Map<VectorX<Scalar>> grad_vec(VectorX<Scalar>& g, std::string_view name) const {
    const auto& t = tensor(name);
    return Eigen::Map<VectorX<Scalar>>(g.data() + t.offset, static_cast<Eigen::Index>(t.size));
  }

  static std::string block_tensor(int b, const char* suffix) { return std::string(kBlockNames[b]) + suffix; }

  MatrixR<Scalar> block_forward(int b, const MatrixR<Scalar>& in, int h, int w, Tape& tp) const {
    auto& bt = tp.blocks[b];
    bt.col = layers::im2col3x3(in, h, w);
    bt.pre.noalias() = weight(block_tensor(b, ".w")) * bt.col;
    const VectorX<Scalar> bias = vec(block_tensor(b, ".b")) + weight(block_tensor(b, ".t")) * tp.temb;
    bt.pre.colwise() += bias;
    return layers::silu(bt.pre);
  }

  MatrixR<Scalar> block_backward(int b, const MatrixR<Scalar>& dout, int h, int w, const Tape& tp,
                                 VectorX<Scalar>& dtemb, VectorX<Scalar>& grad, bool need_input) const {
    const auto& bt = tp.blocks[b];
    const MatrixR<Scalar> dpre = dout.cwiseProduct(layers::silu_grad(bt.pre));
    grad_weight(grad, block_tensor(b, ".w")).noalias() += dpre * bt.col.transpose();
    const VectorX<Scalar> dbias = dpre.rowwise().sum();
    grad_vec(grad, block_tensor(b, ".b")) += dbias;
    grad_weight(grad, block_tensor(b, ".t")).noalias() += dbias * tp.temb.transpose();
    dtemb.noalias() += weight(block_tensor(b, ".t")).transpose() * dbias;
    if (!need_input) return {};
    const MatrixR<Scalar> dcol = weight(block_tensor(b, ".w")).transpose() * dpre;
    return layers::col2im3x3(dcol, block_channels(b).first, h, w);
  }

  DenoiserSpec spec_;
  std::vector<TensorInfo> tensors_;
  std::size_t total_ = 0;
  VectorX<Scalar> params_;
};

}  // namespace bdpm
