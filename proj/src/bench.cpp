#include "reachabc/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace reachabc {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

double percentile(const std::vector<double>& sorted, double q) {
  // Nearest-rank.
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
  return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

}  // namespace

LatencyStats latency_stats(std::vector<double> samples) {
  LatencyStats s;
  if (samples.empty()) return s;
  std::sort(samples.begin(), samples.end());
  s.count = samples.size();
  s.mean_ms = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
  s.p50_ms = percentile(samples, 0.50);
  s.p99_ms = percentile(samples, 0.99);
  s.max_ms = samples.back();
  return s;
}

BenchInput bench_input(const SimulatorGenerator& simulator, std::uint64_t seed, double noise_sigma) {
  BenchInput in;
  in.scene = random_scene(seed);
  Rng rng(seed);
  const auto& target = in.scene.objects[rng() % in.scene.objects.size()];
  in.observed = simulator.generate(target.position);
  std::normal_distribution<double> noise(0.0, noise_sigma);
  for (auto& p : in.observed.points) p += Vec3(noise(rng), noise(rng), noise(rng));
  in.prior = objects_prior(in.scene);
  return in;
}

LatencyStats cold_inference(const InferenceGrid& grid, const TrajectoryGenerator& generator,
                            const InferenceConfig& config, const BenchInput& input, int repeats) {
  InferenceGrid bare = grid;
  bare.cache.reset();
  bare.generation_tag.clear();
  const std::size_t t_index = input.observed.size() / 2;
  std::vector<double> ms;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = Clock::now();
    const InferenceGrid cached = build_cache(bare, generator);
    const PosteriorEstimate p = grid_posterior(cached, input.prior, generator, config, input.observed, t_index);
    ms.push_back(ms_since(t0));
    if (p.weights.empty()) throw Error(ErrorCode::parameter, "empty posterior");
  }
  return latency_stats(std::move(ms));
}

LatencyStats warm_inference(const InferenceGrid& cached, const TrajectoryGenerator& generator,
                            const InferenceConfig& config, const BenchInput& input, int steps) {
  std::vector<double> ms;
  ms.reserve(static_cast<std::size_t>(steps));
  const std::size_t n = input.observed.size();
  for (int s = 0; s < steps; ++s) {
    const std::size_t t_index = 1 + static_cast<std::size_t>(s) % (n - 1);
    const auto t0 = Clock::now();
    const PosteriorEstimate p = grid_posterior(cached, input.prior, generator, config, input.observed, t_index);
    const auto probs = decision_summary(p, cached, input.scene, 0.10);
    ms.push_back(ms_since(t0));
    if (probs.empty()) throw Error(ErrorCode::parameter, "empty decision");
  }
  return latency_stats(std::move(ms));
}

GenerationTiming generation_speedup(const SimulatorGenerator& simulator, const SurrogateGenerator& surrogate,
                                    const std::vector<Vec3>& targets, std::size_t simulator_samples) {
  GenerationTiming g;
  g.trajectories = targets.size();
  g.simulator_measured = std::min(simulator_samples, targets.size());
  std::vector<float> one(static_cast<std::size_t>(simulator.points()) * 3);
  const auto t0 = Clock::now();
  for (std::size_t i = 0; i < g.simulator_measured; ++i) {
    simulator.generate_flat(std::span<const Vec3>(&targets[i], 1), one);
  }
  const double sim_ms = ms_since(t0);
  g.simulator_ms_per_trajectory = sim_ms / static_cast<double>(std::max<std::size_t>(1, g.simulator_measured));
  g.simulator_total_ms = g.simulator_ms_per_trajectory * static_cast<double>(targets.size());

  std::vector<float> all(targets.size() * static_cast<std::size_t>(surrogate.points()) * 3);
  double best = std::numeric_limits<double>::infinity();
  for (int r = 0; r < 5; ++r) {
    const auto t1 = Clock::now();
    surrogate.generate_flat(targets, all);
    best = std::min(best, ms_since(t1));
  }
  g.surrogate_total_ms = best;
  g.speedup = g.simulator_total_ms / g.surrogate_total_ms;
  return g;
}

nlohmann::json to_json(const LatencyStats& s) {
  return {{"mean_ms", s.mean_ms}, {"p50_ms", s.p50_ms}, {"p99_ms", s.p99_ms}, {"max_ms", s.max_ms}, {"count", s.count}};
}

nlohmann::json to_json(const GenerationTiming& g) {
  return {{"trajectories", g.trajectories},
          {"simulator_measured", g.simulator_measured},
          {"simulator_ms_per_trajectory", g.simulator_ms_per_trajectory},
          {"simulator_total_ms", g.simulator_total_ms},
          {"surrogate_total_ms", g.surrogate_total_ms},
          {"speedup", g.speedup}};
}

}  // namespace reachabc
