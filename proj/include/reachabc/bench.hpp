#pragma once

#include "reachabc/generator.hpp"
#include "reachabc/inference.hpp"

#include <nlohmann/json.hpp>

#include <vector>

namespace reachabc {

struct LatencyStats {
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p99_ms = 0.0;
  double max_ms = 0.0;
  std::size_t count = 0;
};

LatencyStats latency_stats(std::vector<double> samples_ms);

// A noisy simulator reach used as the benchmark observation.
struct BenchInput {
  Scene scene;
  Trajectory observed;
  PriorSpec prior;
};

BenchInput bench_input(const SimulatorGenerator& simulator, std::uint64_t seed, double noise_sigma = 0.005);

// Cache build + one posterior on an uncached grid, `repeats` times.
LatencyStats cold_inference(const InferenceGrid& grid, const TrajectoryGenerator& generator,
                            const InferenceConfig& config, const BenchInput& input, int repeats);

// Per-step posterior on a cached grid: prior evaluation, likelihood, decision
// summary. Steps sweep the observed fraction.
LatencyStats warm_inference(const InferenceGrid& cached, const TrajectoryGenerator& generator,
                            const InferenceConfig& config, const BenchInput& input, int steps);

struct GenerationTiming {
  std::size_t trajectories = 0;
  std::size_t simulator_measured = 0;  // simulator runs actually timed
  double simulator_ms_per_trajectory = 0.0;
  double simulator_total_ms = 0.0;     // extrapolated to `trajectories` when fewer were timed
  double surrogate_total_ms = 0.0;     // best of a few batch runs
  double speedup = 0.0;
};

// Single-threaded simulator loop vs one surrogate batch over the same targets.
GenerationTiming generation_speedup(const SimulatorGenerator& simulator, const SurrogateGenerator& surrogate,
                                    const std::vector<Vec3>& targets, std::size_t simulator_samples);

nlohmann::json to_json(const LatencyStats& stats);
nlohmann::json to_json(const GenerationTiming& timing);

}  // namespace reachabc
