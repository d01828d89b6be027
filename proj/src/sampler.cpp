#include "bdpm/sampler.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "bdpm/pnm.hpp"

namespace bdpm {

std::vector<int> select_timesteps(int steps, int total) {
  require(total >= 1, ErrorKind::kInvalidArgument, "select_timesteps: total must be >= 1");
  require(steps >= 1 && steps <= total + 1, ErrorKind::kInvalidArgument,
          "select_timesteps: steps " + std::to_string(steps) + " outside [1, " + std::to_string(total + 1) + "]");
  std::vector<int> ts;
  ts.reserve(static_cast<std::size_t>(steps) + 1);
  for (int i = 0; i <= steps; ++i) {
    // round(total * (steps - i) / steps), half up, in exact integer arithmetic
    const std::int64_t num = 2LL * total * (steps - i) + steps;
    const int t = static_cast<int>(num / (2LL * steps));
    if (ts.empty() || ts.back() != t) ts.push_back(t);
  }
  return ts;
}

std::vector<std::uint64_t> item_seeds(std::uint64_t seed, std::span<const std::uint64_t> ids) {
  std::vector<std::uint64_t> out;
  out.reserve(ids.size());
  for (auto id : ids) out.push_back(derive_seed(seed, {id, 0x73616D70ull}));
  return out;
}

void write_sample_diagnostics(const std::filesystem::path& dir, const SampleTrace& trace) {
  std::filesystem::create_directories(dir);
  std::ofstream csv(dir / "steps.csv");
  require(static_cast<bool>(csv), ErrorKind::kIo, "diagnostics: cannot write " + (dir / "steps.csv").string());
  csv << "index,t,next_beta,predicted_flip_rate,applied_flip_rate\n" << std::setprecision(9);
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    const auto& s = trace.steps[i];
    const Image8 img = recompose(s.x0_hat);
    std::ostringstream name;
    name << "step_" << std::setw(4) << std::setfill('0') << i << "_t" << s.t << (img.channels == 1 ? ".pgm" : ".ppm");
    write_pnm(dir / name.str(), img);
    csv << i << ',' << s.t << ',' << s.next_beta << ',' << s.predicted_flip_rate << ',' << s.applied_flip_rate << '\n';
  }
}

}  // namespace bdpm
