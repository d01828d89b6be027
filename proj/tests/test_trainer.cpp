#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>

#include "bdpm/bitplane.hpp"
#include "bdpm/checkpoint.hpp"
#include "bdpm/dataset.hpp"
#include "bdpm/fileio.hpp"
#include "bdpm/trainer.hpp"
#include "test_util.hpp"

using namespace bdpm;
using bdpm::testing::random_bits;

namespace {

DenoiserSpec tiny_spec(int data_planes = 8, int cond_planes = 9) {
  DenoiserSpec s;
  s.data_planes = data_planes;
  s.cond_planes = cond_planes;
  s.width0 = 8;
  s.width1 = 12;
  s.temb_dim = 16;
  return s;
}

std::vector<Image8> tiny_images(int count, std::uint64_t seed) {
  std::vector<Image8> out;
  for (auto& item : synth_dataset(SynthKind::kMixed, count, 8, 1, seed)) out.push_back(item.image);
  return out;
}

TrainState<float> tiny_state(std::uint64_t seed, double lr = 1e-3) {
  TrainConfig cfg;
  cfg.seed = seed;
  cfg.learning_rate = lr;
  cfg.batch_size = 2;
  TrainState<float> s(cfg, tiny_spec(), LossWeights::linear(1));
  s.initialize(seed + 1);
  return s;
}

std::vector<TrainExample> batch_for(const TrainState<float>& s, const std::vector<Image8>& images) {
  TaskConfig task;
  task.task = Task::kInpainting;
  return build_training_batch(images, task, nullptr, s.config.batch_size, s.step_rng());
}

bool same_bits(const VectorX<float>& a, const VectorX<float>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), sizeof(float) * a.size()) == 0;
}

}  // namespace

TEST_CASE("plane weights") {
  const std::vector<double> expected = {1.0, 0.8714285714285714, 0.7428571428571429, 0.6142857142857143,
                                        0.4857142857142857, 0.35714285714285715, 0.22857142857142856, 0.1};
  const auto w = plane_weights(8);
  REQUIRE(w.size() == 8);
  for (int k = 0; k < 8; ++k) CHECK(w[k] == doctest::Approx(expected[k]).epsilon(1e-12));
  CHECK(plane_weights(2)[0] == 1.0);
  CHECK(plane_weights(2)[1] == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(plane_weights(1) == std::vector<double>{1.0});
  CHECK_THROWS_AS(plane_weights(0), Error);

  const auto rgb = LossWeights::linear(3);
  CHECK(rgb.planes.size() == 24);
  CHECK(rgb.planes[8] == 1.0);
  CHECK(rgb.planes[23] == doctest::Approx(0.1));
  for (double v : rgb.planes) {
    CHECK(v >= 0.1 - 1e-12);
    CHECK(v <= 1.0);
  }
  CHECK(std::all_of(rgb.noise.begin(), rgb.noise.end(), [](double v) { return v == 1.0; }));
}

TEST_CASE("bce: logit 0 gives ln 2 per term") {
  Rng rng(1);
  const auto x0 = random_bits(8, 4, 4, rng);
  const auto z = random_bits(8, 4, 4, rng);
  const MatrixR<double> zero = MatrixR<double>::Zero(8, 16);
  const auto l = bce_loss(zero, zero, x0, z, LossWeights::constant(8));
  CHECK(std::abs(l.loss_x - std::log(2.0)) < 1e-12);
  CHECK(std::abs(l.loss_z - std::log(2.0)) < 1e-12);
  // Weighted mean of equal plane losses is the same value.
  const auto lw = bce_loss(zero, zero, x0, z, LossWeights::linear(1));
  CHECK(std::abs(lw.loss_x - std::log(2.0)) < 1e-12);
}

TEST_CASE("bce: saturated correct logits give ~0 loss") {
  Rng rng(2);
  const auto x0 = random_bits(8, 4, 4, rng);
  const auto z = random_bits(8, 4, 4, rng);
  MatrixR<double> lx(8, 16);
  MatrixR<double> lz(8, 16);
  for (int i = 0; i < 128; ++i) {
    lx(i / 16, i % 16) = x0.bits[i] ? 20.0 : -20.0;
    lz(i / 16, i % 16) = z.bits[i] ? 20.0 : -20.0;
  }
  const auto l = bce_loss(lx, lz, x0, z, LossWeights::linear(1));
  CHECK(l.total < 1e-8);
  CHECK(l.total >= 0.0);
}

TEST_CASE("bce: 2-plane weighted mean matches the hand oracle") {
  // plane 0: logits {0, 2} target {1, 0}; plane 1: logits {-1, 3} target {0, 1}
  BitPlaneTensor x0(2, 1, 2, 2);
  x0.bits = {1, 0, 0, 1};
  MatrixR<double> lx(2, 2);
  lx << 0.0, 2.0, -1.0, 3.0;
  const double a = (std::log(2.0) + std::log1p(std::exp(2.0))) / 2;
  const double b = (std::log1p(std::exp(-1.0)) + std::log1p(std::exp(-3.0))) / 2;
  LossWeights w;
  w.planes = {1.0, 0.1};
  w.noise = {1.0, 1.0};
  const MatrixR<double> zl = MatrixR<double>::Zero(2, 2);
  const auto l = bce_loss(lx, zl, x0, BitPlaneTensor(2, 1, 2, 2), w);
  CHECK(std::abs(l.loss_x - (1.0 * a + 0.1 * b) / 1.1) < 1e-12);

  // Gradient sign follows sigmoid(l) - y, scaled by the plane weight.
  CHECK(l.d_x0(0, 0) < 0.0);
  CHECK(l.d_x0(0, 1) > 0.0);
  CHECK(l.d_x0(1, 0) > 0.0);
  CHECK(l.d_x0(1, 1) < 0.0);
  const double s = 1.0 / (1.0 + std::exp(-2.0));
  CHECK(l.d_x0(0, 1) == doctest::Approx(1.0 / 1.1 / 2 * s));
  CHECK(l.d_x0(1, 1) == doctest::Approx(0.1 / 1.1 / 2 * (1.0 / (1.0 + std::exp(-3.0)) - 1.0)));
}

TEST_CASE("bce: invalid inputs are rejected") {
  BitPlaneTensor t(1, 1, 2, 1);
  MatrixR<double> l = MatrixR<double>::Zero(1, 2);
  const auto w = LossWeights::constant(1);
  l(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(bce_loss(l, l, t, t, w), Error);
  l(0, 1) = 0.0;
  t.bits[0] = 2;
  CHECK_THROWS_AS(bce_loss(l, l, t, BitPlaneTensor(1, 1, 2, 1), w), Error);
  CHECK_THROWS_AS(bce_loss(l, l, BitPlaneTensor(2, 1, 1, 1), BitPlaneTensor(1, 1, 2, 1), w), Error);
}

TEST_CASE("ema: fixed point, decay 0, and geometric closed form") {
  VectorX<double> p = VectorX<double>::LinSpaced(10, -1.0, 2.0);
  VectorX<double> ema = p;
  ema_update(ema, p, 0.995);
  CHECK(ema == p);

  ema.setConstant(7.0);
  ema_update(ema, p, 0.0);
  CHECK(ema == p);

  const VectorX<double> ema0 = VectorX<double>::Constant(10, 3.0);
  ema = ema0;
  for (int k = 1; k <= 500; ++k) {
    ema_update(ema, p, 0.995);
    if (k % 100 == 0) {
      const VectorX<double> expected = p + (ema0 - p) * std::pow(0.995, k);
      CHECK((ema - expected).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("adamw: zero gradient and zero weight decay leave parameters unchanged") {
  auto s = tiny_state(3);
  s.config.weight_decay = 0.0;
  const VectorX<float> before = s.model.parameters();
  adamw_update(s, VectorX<float>::Zero(before.size()).eval());
  CHECK(same_bits(before, s.model.parameters()));
}

TEST_CASE("learning rate: constant, linear warmup, cosine decay") {
  TrainConfig c;
  c.learning_rate = 1e-3;
  c.total_steps = 1100;
  for (std::int64_t k : {0, 500, 1099}) CHECK(c.learning_rate_at(k) == 1e-3);
  c.warmup_steps = 100;
  CHECK(c.learning_rate_at(0) == doctest::Approx(1e-5));
  CHECK(c.learning_rate_at(49) == doctest::Approx(5e-4));
  CHECK(c.learning_rate_at(99) == doctest::Approx(1e-3));
  CHECK(c.learning_rate_at(600) == 1e-3);
  c.cosine = true;
  CHECK(c.learning_rate_at(100) == doctest::Approx(1e-3));
  CHECK(c.learning_rate_at(600) == doctest::Approx(5e-4));
  CHECK(c.learning_rate_at(1100) == doctest::Approx(0.0));
  CHECK(c.learning_rate_at(5000) == doctest::Approx(0.0));
  for (std::int64_t k = 101; k < 1100; ++k) REQUIRE(c.learning_rate_at(k) < c.learning_rate_at(k - 1));
}

TEST_CASE("gradient clipping rescales only gradients above the threshold") {
  auto clipped = tiny_state(41);
  auto scaled = tiny_state(41);
  clipped.config.grad_clip = 0.5;
  const auto n = clipped.model.parameters().size();
  VectorX<float> g = VectorX<float>::LinSpaced(n, -1.0f, 2.0f);
  GradientResult r;
  r.loss = 1.0;
  apply_gradient(clipped, r, g);
  apply_gradient(scaled, r, VectorX<float>(g * static_cast<float>(0.5 / static_cast<double>(g.norm()))));
  CHECK(same_bits(clipped.model.parameters(), scaled.model.parameters()));

  auto small = tiny_state(42);
  auto plain = tiny_state(42);
  small.config.grad_clip = 1e9;
  apply_gradient(small, r, g);
  apply_gradient(plain, r, g);
  CHECK(same_bits(small.model.parameters(), plain.model.parameters()));
}

TEST_CASE("training timesteps are uniform on [0, T] (chi-square, 20 bins)") {
  const int T = 1000;
  std::vector<double> counts(20, 0.0);
  std::vector<double> expected(20, 0.0);
  for (int t = 0; t <= T; ++t) expected[static_cast<std::size_t>(t * 20 / (T + 1))] += 1.0;
  int n = 0;
  const Rng base(17);
  for (int step = 0; step < 10000; ++step) {
    for (int t : draw_training_timesteps(base.split({static_cast<std::uint64_t>(step)}), 8, T)) {
      REQUIRE(t >= 0);
      REQUIRE(t <= T);
      counts[static_cast<std::size_t>(t * 20 / (T + 1))] += 1.0;
      ++n;
    }
  }
  double chi2 = 0.0;
  for (int b = 0; b < 20; ++b) {
    const double e = expected[b] * n / (T + 1);
    chi2 += (counts[b] - e) * (counts[b] - e) / e;
  }
  // 99th percentile of chi-square with 19 degrees of freedom
  CHECK(chi2 < 36.191);
}

TEST_CASE("train_step: identical seeds give identical trajectories") {
  const auto images = tiny_images(4, 5);
  auto a = tiny_state(21);
  auto b = tiny_state(21);
  for (int i = 0; i < 10; ++i) {
    const auto ma = train_step(a, batch_for(a, images));
    const auto mb = train_step(b, batch_for(b, images));
    CHECK(ma.loss == mb.loss);
    CHECK(ma.timesteps == mb.timesteps);
  }
  CHECK(same_bits(a.model.parameters(), b.model.parameters()));
  CHECK(same_bits(a.ema, b.ema));
  CHECK(a.step == 10);
}

TEST_CASE("batch gradient does not depend on the worker count") {
  const auto images = tiny_images(4, 30);
  auto s = tiny_state(31);
  s.config.batch_size = 5;
  const auto batch = noise_batch(s.schedule, batch_for(s, images), s.step_rng());
  VectorX<float> g1;
  VectorX<float> g3;
  const auto r1 = noised_gradient(s.model, s.weights, batch, g1, 1);
  const auto r3 = noised_gradient(s.model, s.weights, batch, g3, 3);
  CHECK(r1.loss == r3.loss);
  CHECK(same_bits(g1, g3));
}

TEST_CASE("train_step: EMA is updated every ema_every steps only") {
  const auto images = tiny_images(2, 6);
  auto s = tiny_state(22);
  const VectorX<float> ema0 = s.ema;
  for (int i = 0; i < 9; ++i) train_step(s, batch_for(s, images));
  CHECK(same_bits(s.ema, ema0));
  train_step(s, batch_for(s, images));
  CHECK_FALSE(same_bits(s.ema, ema0));
}

TEST_CASE("train_step: non-finite loss aborts and leaves state unchanged") {
  const auto images = tiny_images(2, 7);
  auto s = tiny_state(23);
  train_step(s, batch_for(s, images));
  const auto& info = s.model.tensor("out.b");
  s.model.parameters()[static_cast<Eigen::Index>(info.offset)] = std::numeric_limits<float>::infinity();
  const VectorX<float> p = s.model.parameters();
  const VectorX<float> m = s.adam_m;
  const VectorX<float> e = s.ema;
  const auto batch = batch_for(s, images);
  try {
    train_step(s, batch);
    FAIL("expected a numeric error");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::kNumeric);
  }
  CHECK(s.step == 1);
  CHECK(same_bits(p, s.model.parameters()));
  CHECK(same_bits(m, s.adam_m));
  CHECK(same_bits(e, s.ema));
}

TEST_CASE("memorization: a fixed noised batch of two images is fit to loss < 0.05 in 200 steps") {
  const auto images = tiny_images(2, 8);
  TrainConfig cfg;
  cfg.seed = 24;
  cfg.learning_rate = 3e-3;
  cfg.batch_size = 2;
  cfg.weight_decay = 0.0;
  TrainState<float> s(cfg, tiny_spec(), LossWeights::linear(1));
  s.initialize(25);

  std::vector<TrainExample> clean;
  for (const auto& img : images) {
    Rng rng(0);
    clean.push_back({decompose(img), make_condition(img, TaskConfig{}, rng)});
  }
  // The noise is drawn once, so inputs and targets are the same every step.
  const auto batch = noise_batch(s.schedule, clean, Rng(26));
  VectorX<float> grad;
  auto loss = [&] { return noised_gradient(s.model, s.weights, batch, grad).loss; };

  // Adam steps are not individually monotone, so the decrease is checked per 20-step window.
  double prev = loss();
  const double initial = prev;
  for (int window = 0; window < 10; ++window) {
    for (int i = 0; i < 20; ++i) {
      const auto g = noised_gradient(s.model, s.weights, batch, grad);
      apply_gradient(s, g, grad);
    }
    const double now = loss();
    CHECK(now < prev);
    prev = now;
  }
  MESSAGE("memorization loss " << initial << " -> " << prev);
  CHECK(prev < 0.05);
}

TEST_CASE("config round trip") {
  TrainConfig c;
  c.learning_rate = 3.7e-4;
  c.seed = 0xFFFFFFFFFFFFFFF1ull;
  c.total_steps = 1234;
  c.flip = false;
  c.cosine = true;
  c.warmup_steps = 50;
  c.grad_clip = 2.5;
  KeyValues kv;
  c.write(kv);
  const auto back = TrainConfig::read(KeyValues::parse(kv.serialize()));
  CHECK(back == c);
  KeyValues bad = kv;
  bad.set("train.ema_decay", 1.5);
  CHECK_THROWS_AS(TrainConfig::read(bad), Error);
  KeyValues sched = kv;
  sched.set("train.lr_schedule", "linear");
  CHECK_THROWS_AS(TrainConfig::read(sched), Error);
}

TEST_CASE("checkpoint: save/load/save is byte-identical") {
  bdpm::testing::TempDir dir("ckpt");
  const auto images = tiny_images(2, 9);
  auto s = tiny_state(26);
  for (int i = 0; i < 12; ++i) train_step(s, batch_for(s, images));
  const auto p1 = dir.path() / "a.ckpt";
  const auto p2 = dir.path() / "b.ckpt";
  save_checkpoint(s, p1);
  const auto loaded = load_checkpoint(p1);
  save_checkpoint(loaded, p2);
  CHECK(read_file(p1) == read_file(p2));
  CHECK(loaded.step == 12);
  CHECK(loaded.config == s.config);
  CHECK(loaded.model.spec() == s.model.spec());
  CHECK(same_bits(loaded.model.parameters(), s.model.parameters()));
  CHECK(same_bits(loaded.ema, s.ema));
  CHECK(same_bits(loaded.adam_v, s.adam_v));
  CHECK(same_bits(load_ema_model(p1).parameters(), s.ema));
}

TEST_CASE("checkpoint: truncated or corrupted files fail cleanly") {
  bdpm::testing::TempDir dir("ckpt_bad");
  auto s = tiny_state(27);
  const auto bytes = encode_checkpoint(s);
  for (std::size_t cut : {std::size_t{0}, std::size_t{5}, std::size_t{40}, bytes.size() / 2, bytes.size() - 1}) {
    std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    CHECK_THROWS_AS(decode_checkpoint(part), Error);
  }
  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x10;
  CHECK_THROWS_AS(decode_checkpoint(flipped), Error);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(bad_magic), Error);
  CHECK_THROWS_AS(load_checkpoint(dir.path() / "missing.ckpt"), Error);
}

TEST_CASE("checkpoint: resumed training matches an unbroken run for 10 steps") {
  bdpm::testing::TempDir dir("ckpt_resume");
  const auto images = tiny_images(4, 10);
  auto unbroken = tiny_state(28);
  auto first = tiny_state(28);
  for (int i = 0; i < 5; ++i) {
    train_step(unbroken, batch_for(unbroken, images));
    train_step(first, batch_for(first, images));
  }
  save_checkpoint(first, dir.path() / "mid.ckpt");
  auto resumed = load_checkpoint(dir.path() / "mid.ckpt");
  for (int i = 0; i < 10; ++i) {
    const auto a = train_step(unbroken, batch_for(unbroken, images));
    const auto b = train_step(resumed, batch_for(resumed, images));
    CHECK(a.loss == b.loss);
  }
  CHECK(same_bits(unbroken.model.parameters(), resumed.model.parameters()));
  CHECK(same_bits(unbroken.ema, resumed.ema));
}
