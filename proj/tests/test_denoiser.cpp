#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bdpm/bitplane.hpp"
#include "bdpm/conditioning.hpp"
#include "bdpm/denoiser.hpp"
#include "bdpm/loss.hpp"
#include "test_util.hpp"

using namespace bdpm;
using bdpm::testing::random_bits;

namespace {

DenoiserSpec small_spec() {
  DenoiserSpec s;
  s.data_planes = 8;
  s.cond_planes = 9;
  s.width0 = 6;
  s.width1 = 8;
  s.temb_dim = 16;
  return s;
}

Conditioning random_inpaint_cond(int data_planes, int h, int w, Rng& rng) {
  Conditioning c;
  c.task = Task::kInpainting;
  c.planes = random_bits(data_planes, h, w, rng);
  c.mask = random_bits(1, h, w, rng, 1);
  return c;
}

// Boolean image of pixels whose output can depend on input pixel (py, px),
// propagated through the same topology the denoiser uses.
using Map = std::vector<std::vector<bool>>;

Map dilate(const Map& m) {
  const int h = static_cast<int>(m.size());
  const int w = static_cast<int>(m[0].size());
  Map out(h, std::vector<bool>(w, false));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int sy = y + dy;
          const int sx = x + dx;
          if (sy >= 0 && sy < h && sx >= 0 && sx < w && m[sy][sx]) out[y][x] = true;
        }
  return out;
}

Map pool(const Map& m) {
  const int h = static_cast<int>(m.size()) / 2;
  const int w = static_cast<int>(m[0].size()) / 2;
  Map out(h, std::vector<bool>(w, false));
  for (int y = 0; y < 2 * h; ++y)
    for (int x = 0; x < 2 * w; ++x)
      if (m[y][x]) out[y / 2][x / 2] = true;
  return out;
}

Map upsample(const Map& m) {
  const int h = static_cast<int>(m.size()) * 2;
  const int w = static_cast<int>(m[0].size()) * 2;
  Map out(h, std::vector<bool>(w, false));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out[y][x] = m[y / 2][x / 2];
  return out;
}

Map unite(Map a, const Map& b) {
  for (std::size_t y = 0; y < a.size(); ++y)
    for (std::size_t x = 0; x < a[y].size(); ++x) a[y][x] = a[y][x] || b[y][x];
  return a;
}

Map receptive_field(int h, int w, int py, int px) {
  Map in(h, std::vector<bool>(w, false));
  in[py][px] = true;
  const Map a0 = dilate(in);
  const Map s0 = dilate(a0);
  const Map s1 = dilate(dilate(pool(s0)));
  const Map m = dilate(dilate(pool(s1)));
  const Map d1 = dilate(unite(upsample(m), s1));
  const Map d0 = dilate(unite(upsample(d1), s0));
  return dilate(d0);  // output conv
}

}  // namespace

TEST_CASE("layout: parameter count and output split for 8-bit RGB") {
  Denoiser<float> net(DenoiserSpec{});
  CHECK(net.spec().input_channels() == 49);
  CHECK(net.spec().output_channels() == 48);
  CHECK(net.parameter_count() < 1'000'000);
  CHECK(net.tensor("out.w").shape[0] == 48);
  std::size_t sum = 0;
  for (const auto& t : net.tensors()) {
    CHECK(t.offset == sum);
    sum += t.size;
  }
  CHECK(sum == net.parameter_count());
}

TEST_CASE("zero-initialized output layer gives logit 0 everywhere") {
  Denoiser<float> net(DenoiserSpec{});
  net.initialize(1);
  Rng rng(2);
  const auto x = random_bits(24, 16, 16, rng);
  const auto y = random_inpaint_cond(24, 16, 16, rng);
  const auto out = net.predict(x, 500, y);
  CHECK(out.x0_logits.rows() == 24);
  CHECK(out.z_logits.rows() == 24);
  CHECK(out.x0_logits.cols() == 256);
  CHECK(out.x0_logits.cwiseAbs().maxCoeff() == 0.0f);
  CHECK(out.z_logits.cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("forward is deterministic and finite") {
  Denoiser<float> net(DenoiserSpec{});
  net.initialize(3, false);
  Rng rng(4);
  const auto x = random_bits(24, 8, 8, rng);
  const auto y = random_inpaint_cond(24, 8, 8, rng);
  const auto a = net.predict(x, 10, y);
  const auto b = net.predict(x, 10, y);
  CHECK(a.x0_logits.allFinite());
  CHECK(a.x0_logits == b.x0_logits);
  CHECK(a.z_logits == b.z_logits);
}

TEST_CASE("shape errors are rejected") {
  Denoiser<float> net(small_spec());
  Rng rng(5);
  const auto x = random_bits(8, 8, 8, rng);
  auto y = random_inpaint_cond(8, 8, 12, rng);
  CHECK_THROWS_AS(net.predict(x, 0, y), Error);
  y = random_inpaint_cond(8, 8, 8, rng);
  CHECK_THROWS_AS(net.predict(random_bits(9, 8, 8, rng), 0, y), Error);
  CHECK_THROWS_AS(net.predict(x, 1001, y), Error);
  CHECK_THROWS_AS(net.predict(random_bits(8, 6, 6, rng), 0, random_inpaint_cond(8, 6, 6, rng)), Error);
}

TEST_CASE("single-pixel perturbation only affects the receptive field") {
  Denoiser<double> net(small_spec());
  net.initialize(6, false);
  Rng rng(7);
  const int h = 64;
  const int w = 64;
  const auto x = random_bits(8, h, w, rng);
  const auto y = random_inpaint_cond(8, h, w, rng);
  const auto base = net.predict(x, 250, y);
  for (auto [py, px] : {std::pair{0, 0}, std::pair{29, 40}, std::pair{63, 5}}) {
    auto xp = x;
    xp.at(3, py, px) ^= 1;
    const auto pert = net.predict(xp, 250, y);
    const Map field = receptive_field(h, w, py, px);
    int changed_inside = 0;
    int outside = 0;
    for (int yy = 0; yy < h; ++yy)
      for (int xx = 0; xx < w; ++xx) {
        const int col = yy * w + xx;
        const bool differs = (base.x0_logits.col(col) != pert.x0_logits.col(col)) ||
                             (base.z_logits.col(col) != pert.z_logits.col(col));
        if (!field[yy][xx]) {
          ++outside;
          REQUIRE_FALSE(differs);
        } else if (differs) {
          ++changed_inside;
        }
      }
    CHECK(changed_inside > 0);
    CHECK(outside > 0);
  }
}

TEST_CASE("timestep embedding") {
  const auto e0 = timestep_embedding(0, 128);
  for (int i = 0; i < 64; ++i) {
    CHECK(e0[i] == 0.0);
    CHECK(e0[64 + i] == 1.0);
  }
  // Paired sin/cos features have constant norm sqrt(dim / 2), so distinctness is checked on the vectors.
  CHECK((timestep_embedding(1, 128) - timestep_embedding(2, 128)).norm() > 0.1);
  CHECK(timestep_embedding(7, 128).norm() == doctest::Approx(8.0));
  // Similarity to t = 400 falls off with distance, checked on a coarse ladder.
  const auto ref = timestep_embedding(400, 128);
  double prev = ref.dot(ref);
  for (int d : {1, 4, 16, 64, 256}) {
    const double s = ref.dot(timestep_embedding(400 + d, 128));
    CHECK(s < prev);
    prev = s;
  }
}

TEST_CASE("binarize: strict threshold") {
  MatrixR<double> l(1, 3);
  l << 3.0, 0.0, -3.0;
  const auto b = binarize(l, 1, 3);
  CHECK(b.bits == std::vector<std::uint8_t>{1, 0, 0});
  CHECK(binarize(l, 1, 3, 0.04).bits == std::vector<std::uint8_t>{1, 1, 1});
  CHECK_THROWS_AS(binarize(l, 1, 3, 1.0), Error);
  CHECK_THROWS_AS(binarize(l, 1, 3, 0.0), Error);
}

namespace {

double loss_at(const Denoiser<double>& net, const BitPlaneTensor& x, int t, const Conditioning& y,
               const BitPlaneTensor& x0, const BitPlaneTensor& z, const LossWeights& w) {
  const auto out = net.predict(x, t, y);
  return bce_loss(out.x0_logits, out.z_logits, x0, z, w).total;
}

}  // namespace

TEST_CASE("gradient matches 5-point finite differences") {
  Denoiser<double> net(small_spec());
  net.initialize(8, false);
  Rng rng(9);
  const auto x = random_bits(8, 8, 8, rng);
  const auto y = random_inpaint_cond(8, 8, 8, rng);
  const auto x0 = random_bits(8, 8, 8, rng);
  const auto z = random_bits(8, 8, 8, rng);
  const auto w = LossWeights::linear(1);
  const int t = 321;

  typename Denoiser<double>::Tape tape;
  const auto out = net.forward(x, t, y, &tape);
  const auto l = bce_loss(out.x0_logits, out.z_logits, x0, z, w);
  VectorX<double> grad = VectorX<double>::Zero(net.parameters().size());
  net.backward(tape, l.d_x0, l.d_z, grad);

  const double h = 1e-4;
  double worst = 0.0;
  for (int probe = 0; probe < 20; ++probe) {
    const auto i = static_cast<Eigen::Index>(rng.uniform_int(0, net.parameters().size() - 1));
    const double p = net.parameters()[i];
    auto at = [&](double v) {
      net.parameters()[i] = v;
      return loss_at(net, x, t, y, x0, z, w);
    };
    const double fd = (-at(p + 2 * h) + 8 * at(p + h) - 8 * at(p - h) + at(p - 2 * h)) / (12 * h);
    net.parameters()[i] = p;
    const double scale = std::max(std::abs(fd), std::abs(grad[i]));
    if (scale > 1e-9) worst = std::max(worst, std::abs(fd - grad[i]) / scale);
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("linear output layer gradient matches the closed form (sigma - target) x") {
  Denoiser<double> net(small_spec());
  net.initialize(10, false);
  Rng rng(11);
  const auto x = random_bits(8, 8, 8, rng);
  const auto y = random_inpaint_cond(8, 8, 8, rng);
  const auto x0 = random_bits(8, 8, 8, rng);
  const auto z = random_bits(8, 8, 8, rng);
  const auto w = LossWeights::constant(8);

  typename Denoiser<double>::Tape tape;
  const auto out = net.forward(x, 77, y, &tape);
  const auto l = bce_loss(out.x0_logits, out.z_logits, x0, z, w);
  VectorX<double> grad = VectorX<double>::Zero(net.parameters().size());
  net.backward(tape, l.d_x0, l.d_z, grad);

  // out row r (x0 plane r), input feature j: sum_i (sigmoid(l_ri) - y_ri) col_ji / (P * HW)
  const auto& info = net.tensor("out.w");
  const int cols = info.shape[1];
  for (int r : {0, 5}) {
    for (int j : {0, 17, cols - 1}) {
      double expected = 0.0;
      for (int i = 0; i < 64; ++i) {
        const double s = 1.0 / (1.0 + std::exp(-out.x0_logits(r, i)));
        expected += (s - x0.bits[static_cast<std::size_t>(r) * 64 + i]) * tape.out_col(j, i);
      }
      expected /= 8.0 * 64.0;
      CHECK(grad[static_cast<Eigen::Index>(info.offset) + r * cols + j] == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("constant-output network passes no gradient to hidden weights") {
  Denoiser<double> net(small_spec());
  net.initialize(12);  // zero output layer
  Rng rng(13);
  const auto x = random_bits(8, 8, 8, rng);
  const auto y = random_inpaint_cond(8, 8, 8, rng);
  typename Denoiser<double>::Tape tape;
  const auto out = net.forward(x, 5, y, &tape);
  const auto l = bce_loss(out.x0_logits, out.z_logits, random_bits(8, 8, 8, rng), random_bits(8, 8, 8, rng),
                          LossWeights::linear(1));
  VectorX<double> grad = VectorX<double>::Zero(net.parameters().size());
  net.backward(tape, l.d_x0, l.d_z, grad);
  for (const auto& t : net.tensors()) {
    const double norm = grad.segment(static_cast<Eigen::Index>(t.offset), static_cast<Eigen::Index>(t.size)).norm();
    if (t.name.starts_with("out."))
      CHECK(norm > 0.0);
    else
      CHECK(norm == 0.0);
  }
}

TEST_CASE("float and double forward agree") {
  Denoiser<double> net(small_spec());
  net.initialize(14, false);
  const auto netf = net.cast<float>();
  Rng rng(15);
  const auto x = random_bits(8, 8, 8, rng);
  const auto y = random_inpaint_cond(8, 8, 8, rng);
  const auto a = net.predict(x, 900, y);
  const auto b = netf.predict(x, 900, y);
  CHECK((a.x0_logits - b.x0_logits.cast<double>()).cwiseAbs().maxCoeff() < 1e-4);
}
