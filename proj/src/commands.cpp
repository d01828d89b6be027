#include "bdpm/commands.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "bdpm/bitplane.hpp"
#include "bdpm/checkpoint.hpp"
#include "bdpm/pnm.hpp"

namespace bdpm {

namespace fs = std::filesystem;

namespace {

std::vector<int> parse_int_list(const std::string& key, const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    KeyValues one;
    one.set(key, tok);
    const auto v = one.get_int(key, 0);
    require(v >= 1, ErrorKind::kConfig, "config: '" + key + "' entries must be >= 1");
    out.push_back(static_cast<int>(v));
  }
  require(!out.empty(), ErrorKind::kConfig, "config: '" + key + "' is empty");
  return out;
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string image_ext(const Image8& img) { return img.channels == 1 ? ".pgm" : ".ppm"; }

// Train, eval and eval-condition streams of the procedural corpus.
std::uint64_t train_corpus_seed(const RunConfig& c) { return c.data_seed; }
std::uint64_t eval_corpus_seed(const RunConfig& c) { return c.data_seed + 1; }
std::uint64_t eval_cond_seed(const RunConfig& c) { return c.data_seed + 2; }

std::vector<EvalItem> limit(std::vector<EvalItem> items, int n) {
  if (n > 0 && static_cast<std::size_t>(n) < items.size()) items.resize(static_cast<std::size_t>(n));
  return items;
}

TrainState<float> load_for_eval(const fs::path& checkpoint) {
  require(fs::exists(checkpoint), ErrorKind::kIo, "checkpoint not found: " + checkpoint.string());
  return load_checkpoint(checkpoint);
}

Image8 mask_image(const BitPlaneTensor& mask) {
  Image8 img(1, mask.height, mask.width);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = mask.bits[i] ? 255 : 0;
  return img;
}

double mean_or_nan(const std::vector<double>& v, std::size_t i) {
  return i < v.size() ? v[i] : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

RunConfig RunConfig::from(const KeyValues& kv) {
  RunConfig c;
  c.seed = kv.get_u64("seed", c.seed);
  c.task.task = parse_task(kv.get("task", to_string(c.task.task)));
  c.out = kv.get("out", c.out.string());

  c.manifest = kv.get("data.manifest", "");
  c.train_split = kv.get("data.train_split", c.train_split);
  c.eval_split = kv.get("data.eval_split", c.eval_split);
  c.synth_kind = parse_synth_kind(kv.get("data.kind", to_string(c.synth_kind)));
  c.train_count = static_cast<int>(kv.get_int("data.train_count", c.train_count));
  c.eval_count = static_cast<int>(kv.get_int("data.eval_count", c.eval_count));
  c.image_size = static_cast<int>(kv.get_int("data.size", c.image_size));
  c.channels = static_cast<int>(kv.get_int("data.channels", c.channels));
  c.data_seed = kv.get_u64("data.seed", c.seed);
  require(c.train_count >= 1 && c.eval_count >= 1, ErrorKind::kConfig, "config: data counts must be >= 1");
  require(c.channels == 1 || c.channels == 3, ErrorKind::kConfig, "config: data.channels must be 1 or 3");

  c.task.band.lo = kv.get_double("mask.lo", c.task.band.lo);
  c.task.band.hi = kv.get_double("mask.hi", c.task.band.hi);
  require(0.0 < c.task.band.lo && c.task.band.lo <= c.task.band.hi && c.task.band.hi < 1.0, ErrorKind::kConfig,
          "config: need 0 < mask.lo <= mask.hi < 1");
  c.task.sr_factor = static_cast<int>(kv.get_int("sr.factor", c.task.sr_factor));
  require(c.task.sr_factor >= 2, ErrorKind::kConfig, "config: sr.factor must be >= 2");

  c.train = TrainConfig::read(kv);
  DenoiserSpec base;
  base.width0 = static_cast<int>(kv.get_int("model.width0", base.width0));
  base.width1 = static_cast<int>(kv.get_int("model.width1", base.width1));
  base.temb_dim = static_cast<int>(kv.get_int("model.temb_dim", base.temb_dim));
  base.max_timestep = c.train.schedule_steps;
  try {
    c.spec = spec_for(c.channels, c.task.task, base);
  } catch (const Error& e) {
    fail(ErrorKind::kConfig, std::string("config: ") + e.what());
  }
  c.log_every = kv.get_int("train.log_every", c.log_every);
  c.checkpoint_every = kv.get_int("train.checkpoint_every", c.checkpoint_every);
  c.resume = kv.get_bool("train.resume", c.resume);

  c.sampler.steps =
      static_cast<int>(kv.get_int("sample.steps", c.task.task == Task::kInpainting ? 100 : 30));
  c.sampler.threshold = kv.get_double("sample.threshold", c.sampler.threshold);
  c.sampler.seed = kv.get_u64("sample.seed", c.seed);
  require(c.sampler.steps >= 1, ErrorKind::kConfig, "config: sample.steps must be >= 1");
  require(c.sampler.threshold > 0.0 && c.sampler.threshold < 1.0, ErrorKind::kConfig,
          "config: sample.threshold must lie in (0, 1)");
  c.diagnostics = static_cast<int>(kv.get_int("sample.diagnostics", c.diagnostics));
  c.eval_limit = static_cast<int>(kv.get_int("eval.count", c.eval_limit));
  c.sweep_steps = parse_int_list("sweep.steps", kv.get("sweep.steps", join(c.sweep_steps)));

  const auto unknown = kv.unread_keys();
  if (!unknown.empty()) {
    std::string names;
    for (const auto& k : unknown) names += (names.empty() ? "" : ", ") + k;
    fail(ErrorKind::kConfig, "config: unknown keys: " + names);
  }
  return c;
}

KeyValues RunConfig::resolved() const {
  KeyValues kv;
  kv.set("seed", seed);
  kv.set("task", to_string(task.task));
  kv.set("out", out.string());
  kv.set("data.manifest", manifest.string());
  kv.set("data.train_split", train_split);
  kv.set("data.eval_split", eval_split);
  kv.set("data.kind", to_string(synth_kind));
  kv.set("data.train_count", train_count);
  kv.set("data.eval_count", eval_count);
  kv.set("data.size", image_size);
  kv.set("data.channels", channels);
  kv.set("data.seed", data_seed);
  kv.set("mask.lo", task.band.lo);
  kv.set("mask.hi", task.band.hi);
  kv.set("sr.factor", task.sr_factor);
  kv.set("model.width0", spec.width0);
  kv.set("model.width1", spec.width1);
  kv.set("model.temb_dim", spec.temb_dim);
  train.write(kv);
  kv.set("train.log_every", log_every);
  kv.set("train.checkpoint_every", checkpoint_every);
  kv.set("train.resume", resume);
  kv.set("sample.steps", sampler.steps);
  kv.set("sample.threshold", sampler.threshold);
  kv.set("sample.seed", sampler.seed);
  kv.set("sample.diagnostics", diagnostics);
  kv.set("eval.count", eval_limit);
  kv.set("sweep.steps", join(sweep_steps));
  return kv;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return 3;
    case ErrorKind::kIo: return 4;
    case ErrorKind::kCorruptFile: return 5;
    case ErrorKind::kNumeric: return 6;
    case ErrorKind::kInvariant: return 7;
    case ErrorKind::kShapeMismatch: return 8;
    case ErrorKind::kInvalidArgument: return 9;
  }
  return 1;
}

std::vector<Image8> load_train_images(const RunConfig& cfg) {
  std::vector<Image8> out;
  if (cfg.manifest.empty()) {
    for (auto& item : synth_dataset(cfg.synth_kind, cfg.train_count, cfg.image_size, cfg.channels,
                                    train_corpus_seed(cfg)))
      out.push_back(std::move(item.image));
  } else {
    for (auto& item : load_dataset(cfg.manifest, cfg.train_split)) out.push_back(std::move(item.image));
  }
  require(!out.empty(), ErrorKind::kConfig, "no training images (split '" + cfg.train_split + "')");
  return out;
}

std::vector<SynthImage> load_eval_items(const RunConfig& cfg) {
  auto items = cfg.manifest.empty()
                   ? synth_dataset(cfg.synth_kind, cfg.eval_count, cfg.image_size, cfg.channels, eval_corpus_seed(cfg))
                   : load_dataset(cfg.manifest, cfg.eval_split);
  require(!items.empty(), ErrorKind::kConfig, "no evaluation images (split '" + cfg.eval_split + "')");
  return items;
}

std::vector<EvalItem> eval_set(const RunConfig& cfg) {
  return limit(build_eval_set(load_eval_items(cfg), cfg.task, eval_cond_seed(cfg)), cfg.eval_limit);
}

TrainState<float> cmd_train(const RunConfig& cfg, std::ostream& log) {
  fs::create_directories(cfg.out);
  cfg.resolved().save(cfg.out / "config.txt");
  const auto images = load_train_images(cfg);
  const fs::path ckpt = cfg.out / "checkpoint.bin";
  const fs::path metrics = cfg.out / "metrics.csv";

  TrainState<float> state(cfg.train, cfg.spec, LossWeights::for_data_planes(cfg.spec.data_planes));
  std::string kept;
  if (cfg.resume && fs::exists(ckpt)) {
    TrainState<float> loaded = load_checkpoint(ckpt);
    TrainConfig want = cfg.train;
    want.total_steps = loaded.config.total_steps;
    require(loaded.config == want && loaded.model.spec() == cfg.spec, ErrorKind::kConfig,
            "train: checkpoint " + ckpt.string() + " was written with a different model or training config");
    loaded.config.total_steps = cfg.train.total_steps;
    state = std::move(loaded);
    // Keep metric rows up to the checkpoint; later rows are recomputed identically.
    std::ifstream in(metrics);
    std::string line;
    if (std::getline(in, line)) kept = line + '\n';
    while (std::getline(in, line)) {
      if (std::stoll(line.substr(0, line.find(','))) > state.step) break;
      kept += line + '\n';
    }
    log << "resuming from step " << state.step << '\n';
  } else {
    state.initialize(derive_seed(cfg.train.seed, {0x696E6974ull}));
  }
  if (kept.empty()) kept = "step,loss,loss_x,loss_z,lr,wallclock\n";
  {
    std::ofstream f(metrics, std::ios::trunc);
    require(static_cast<bool>(f), ErrorKind::kIo, "train: cannot write " + metrics.string());
    f << kept;
  }
  std::ofstream csv(metrics, std::ios::app);
  csv << std::setprecision(9);

  log << "training " << state.model.parameter_count() << " parameters on " << images.size() << " images, steps "
      << state.step << " -> " << cfg.train.total_steps << '\n';
  const auto t0 = std::chrono::steady_clock::now();
  double window = 0.0;
  int window_n = 0;
  TrainLoopHooks hooks;
  hooks.on_step = [&](const StepMetrics& m) {
    const double el = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    csv << m.step << ',' << m.loss << ',' << m.loss_x << ',' << m.loss_z << ',' << m.learning_rate << ','
        << std::fixed << std::setprecision(3) << el << std::defaultfloat << std::setprecision(9) << '\n';
    window += m.loss;
    ++window_n;
    if (cfg.log_every > 0 && m.step % cfg.log_every == 0) {
      log << "step " << m.step << " loss " << window / window_n << " (" << std::fixed << std::setprecision(1) << el
          << std::defaultfloat << std::setprecision(6) << " s)" << std::endl;
      window = 0.0;
      window_n = 0;
    }
  };
  hooks.checkpoint_every = cfg.checkpoint_every;
  hooks.on_checkpoint = [&](const TrainState<float>& s) {
    csv.flush();
    save_checkpoint(s, ckpt);
  };
  train_loop(state, images, cfg.task, cfg.train.total_steps, hooks);
  csv.flush();
  save_checkpoint(state, ckpt);
  log << "saved " << ckpt.string() << " at step " << state.step << '\n';
  return state;
}

void cmd_sample(const RunConfig& cfg, const fs::path& checkpoint, const fs::path& dir, std::ostream& log) {
  const auto state = load_for_eval(checkpoint);
  const auto model = state.ema_model();
  const auto items = eval_set(cfg);
  fs::create_directories(dir);

  std::vector<Conditioning> conds;
  std::vector<std::uint64_t> keys;
  for (const auto& it : items) {
    conds.push_back(it.cond);
    keys.push_back(it.key);
  }
  const auto seeds = item_seeds(cfg.sampler.seed, keys);
  const auto results = sample_batch(model, state.schedule, std::span<const Conditioning>(conds), cfg.sampler,
                                    std::span<const std::uint64_t>(seeds));
  int failed = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& it = items[i];
    if (!results[i].image) {
      log << "sample " << it.id << " failed: " << results[i].error << '\n';
      ++failed;
      continue;
    }
    write_pnm(dir / (it.id + image_ext(*results[i].image)), *results[i].image);
    const Image8 cond = condition_image(it.cond);
    write_pnm(dir / (it.id + "_cond" + image_ext(cond)), cond);
    if (it.cond.mask) write_pnm(dir / (it.id + "_mask.pgm"), mask_image(*it.cond.mask));
  }
  for (int i = 0; i < cfg.diagnostics && static_cast<std::size_t>(i) < items.size(); ++i) {
    SamplerConfig sc = cfg.sampler;
    sc.seed = seeds[static_cast<std::size_t>(i)];
    SampleTrace trace;
    sample(model, state.schedule, items[static_cast<std::size_t>(i)].cond, sc, &trace);
    write_sample_diagnostics(dir / "diagnostics" / items[static_cast<std::size_t>(i)].id, trace);
  }
  log << "wrote " << items.size() - static_cast<std::size_t>(failed) << " samples to " << dir.string() << '\n';
  require(failed == 0, ErrorKind::kInvariant, "sample: " + std::to_string(failed) + " items failed");
}

EvalReport cmd_eval(const RunConfig& cfg, const fs::path& pred_dir, std::ostream& log) {
  const auto items = eval_set(cfg);
  EvalReport report;
  for (const auto& it : items) {
    const fs::path p = pred_dir / (it.id + image_ext(it.truth));
    require(fs::exists(p), ErrorKind::kIo, "eval: missing prediction " + p.string());
    const Image8 pred = read_pnm(p);
    require(pred.channels == it.truth.channels && pred.height == it.truth.height && pred.width == it.truth.width,
            ErrorKind::kShapeMismatch, "eval: " + p.string() + " does not match the ground-truth shape");
    report.rows.push_back(evaluate_pair(it.id, pred, it.truth, it.cond.mask ? &*it.cond.mask : nullptr));
  }
  report.finalize();
  fs::create_directories(cfg.out);
  write_eval_csv(cfg.out / "eval.csv", report);
  log << "images " << report.rows.size() << " psnr " << report.mean_psnr << " ssim " << report.mean_ssim
      << " ber_msb " << mean_or_nan(report.mean_ber, 0);
  if (!report.mean_masked_ber.empty()) log << " masked_ber_msb " << report.mean_masked_ber[0];
  log << '\n';
  return report;
}

void cmd_codec_check(const RunConfig& cfg, int random_images, std::ostream& log) {
  fs::create_directories(cfg.out);
  const fs::path tmp = cfg.out / "codec_check.bp";
  std::size_t checked = 0;
  auto check = [&](const Image8& img, const std::string& what) {
    const auto planes = decompose(img);
    require(recompose(planes) == img, ErrorKind::kInvariant, "codec-check: planes round trip failed on " + what);
    require(unpack_bits(pack_bits(planes), planes.planes, planes.height, planes.width) == planes,
            ErrorKind::kInvariant, "codec-check: packing round trip failed on " + what);
    ++checked;
  };

  Image8 ramp(1, 16, 16);
  for (int v = 0; v < 256; ++v) ramp.data[static_cast<std::size_t>(v)] = static_cast<std::uint8_t>(v);
  check(ramp, "0..255 ramp");
  write_packed_planes(tmp, decompose(ramp));
  require(recompose(read_packed_planes(tmp)) == ramp, ErrorKind::kInvariant, "codec-check: packed file round trip");

  Rng rng(derive_seed(cfg.seed, {0x636F6465ull}));
  for (int i = 0; i < random_images; ++i) {
    Image8 img(3, 32, 32);
    for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    check(img, "random image " + std::to_string(i));
  }
  for (const auto& img : load_train_images(cfg)) check(img, "training image");
  for (const auto& item : load_eval_items(cfg)) check(item.image, item.record.path);
  fs::remove(tmp);
  log << "codec-check: " << checked << " images, 0 bit errors\nPASS\n";
}

std::vector<SweepRow> cmd_step_sweep(const RunConfig& cfg, const fs::path& checkpoint, std::ostream& log) {
  const auto state = load_for_eval(checkpoint);
  const auto model = state.ema_model();
  const auto items = eval_set(cfg);
  const EvalReport base = evaluate_baseline(items);
  std::vector<SweepRow> rows;
  for (int s : cfg.sweep_steps) {
    SamplerConfig sc = cfg.sampler;
    sc.steps = s;
    rows.push_back({s, evaluate_model(model, state.schedule, items, sc)});
    const auto& r = rows.back().report;
    log << "S=" << s << " psnr " << r.mean_psnr << " ssim " << r.mean_ssim << " (" << r.wallclock_seconds << " s)\n";
  }

  fs::create_directories(cfg.out);
  std::ostringstream csv, md;
  csv << std::setprecision(9) << "steps,psnr,ssim,ber_msb,masked_ber_msb,wallclock\n";
  csv << "baseline," << base.mean_psnr << ',' << base.mean_ssim << ',' << mean_or_nan(base.mean_ber, 0) << ','
      << mean_or_nan(base.mean_masked_ber, 0) << ",0\n";
  md << std::fixed << std::setprecision(4);
  md << "| S | PSNR (dB) | SSIM | BER MSB | masked BER MSB |\n|---|---|---|---|---|\n";
  md << "| copy condition | " << base.mean_psnr << " | " << base.mean_ssim << " | " << mean_or_nan(base.mean_ber, 0)
     << " | " << mean_or_nan(base.mean_masked_ber, 0) << " |\n";
  for (const auto& [s, r] : rows) {
    csv << s << ',' << r.mean_psnr << ',' << r.mean_ssim << ',' << mean_or_nan(r.mean_ber, 0) << ','
        << mean_or_nan(r.mean_masked_ber, 0) << ',' << std::fixed << std::setprecision(3) << r.wallclock_seconds
        << std::defaultfloat << std::setprecision(9) << '\n';
    md << "| " << s << " | " << r.mean_psnr << " | " << r.mean_ssim << " | " << mean_or_nan(r.mean_ber, 0) << " | "
       << mean_or_nan(r.mean_masked_ber, 0) << " |\n";
  }
  for (const auto& [name, text] : {std::pair{"sweep.csv", csv.str()}, std::pair{"sweep.md", md.str()}}) {
    std::ofstream f(cfg.out / name, std::ios::trunc);
    require(static_cast<bool>(f), ErrorKind::kIo, "step-sweep: cannot write " + (cfg.out / name).string());
    f << text;
  }
  return rows;
}

}  // namespace bdpm
