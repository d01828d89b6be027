// bdpm: train, sample, evaluate and sweep binary diffusion models over bit-planes.
//
//   bdpm train       --config run.cfg [--set key=value ...]
//   bdpm sample      --config run.cfg [--checkpoint ckpt] [--steps S] [--threshold p]
//   bdpm eval        --config run.cfg --pred dir
//   bdpm codec-check [--config run.cfg]
//   bdpm step-sweep  --config run.cfg [--checkpoint ckpt]
//
// Exit codes: 0 ok, 1 unexpected, 2 usage, 3 config, 4 io, 5 corrupt file,
// 6 numeric, 7 invariant violated, 8 shape mismatch, 9 invalid argument.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "bdpm/commands.hpp"

namespace {

struct Options {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<int> steps;
  std::optional<double> threshold;
  std::string out;
  std::string checkpoint;
  std::string pred;
  int random_images = 1000;
};

bdpm::RunConfig resolve(const Options& o) {
  bdpm::KeyValues kv = o.config.empty() ? bdpm::KeyValues{} : bdpm::KeyValues::load(o.config);
  bdpm::KeyValues over;
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    bdpm::require(eq != std::string::npos && eq > 0, bdpm::ErrorKind::kConfig, "--set expects key=value, got '" + s + "'");
    over.set(s.substr(0, eq), s.substr(eq + 1));
  }
  if (o.seed) over.set("seed", *o.seed);
  if (o.steps) over.set("sample.steps", *o.steps);
  if (o.threshold) over.set("sample.threshold", *o.threshold);
  if (!o.out.empty()) over.set("out", o.out);
  kv.merge(over);
  return bdpm::RunConfig::from(kv);
}

std::filesystem::path checkpoint_of(const Options& o, const bdpm::RunConfig& cfg) {
  return o.checkpoint.empty() ? cfg.out / "checkpoint.bin" : std::filesystem::path(o.checkpoint);
}

}  // namespace

int main(int argc, char** argv) {
  bdpm::tune_allocator();
  bdpm::flush_denormals();
  CLI::App app{"Binary diffusion over image bit-planes"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--config", o.config, "key = value run configuration");
    cmd->add_option("--set", o.sets, "override one config key (key=value); repeatable");
    cmd->add_option("--seed", o.seed, "run seed");
    cmd->add_option("--out", o.out, "output directory");
  };
  auto sampling = [&](CLI::App* cmd) {
    cmd->add_option("--steps", o.steps, "sampling steps S");
    cmd->add_option("--threshold", o.threshold, "binarization threshold");
    cmd->add_option("--checkpoint", o.checkpoint, "checkpoint (default <out>/checkpoint.bin)");
  };

  auto* train = app.add_subcommand("train", "train a denoiser (resumes with --set train.resume=true)");
  common(train);
  auto* smp = app.add_subcommand("sample", "sample the held-out split with the EMA weights");
  common(smp);
  sampling(smp);
  auto* ev = app.add_subcommand("eval", "score predicted images against the held-out split");
  common(ev);
  ev->add_option("--pred", o.pred, "directory of <id>.ppm / <id>.pgm predictions")->required();
  auto* codec = app.add_subcommand("codec-check", "exhaustive bit-plane codec round trip");
  common(codec);
  codec->add_option("--random", o.random_images, "random 32x32 RGB images to check");
  auto* sweep = app.add_subcommand("step-sweep", "evaluate PSNR/SSIM across sampling step counts");
  common(sweep);
  sampling(sweep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : bdpm::kExitUsage;
  }

  try {
    const bdpm::RunConfig cfg = resolve(o);
    if (*train) {
      bdpm::cmd_train(cfg, std::cout);
    } else if (*smp) {
      bdpm::cmd_sample(cfg, checkpoint_of(o, cfg), cfg.out / "samples", std::cout);
    } else if (*ev) {
      bdpm::cmd_eval(cfg, o.pred, std::cout);
    } else if (*codec) {
      bdpm::cmd_codec_check(cfg, o.random_images, std::cout);
    } else if (*sweep) {
      bdpm::cmd_step_sweep(cfg, checkpoint_of(o, cfg), std::cout);
    }
  } catch (const bdpm::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return bdpm::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << '\n';
    return 1;
  }
  return EXIT_SUCCESS;
}
