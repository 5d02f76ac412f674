#pragma once

#include "reachabc/common.hpp"

#include <cstddef>
#include <vector>

namespace reachabc {

struct AbcConfig {
  double epsilon = 0.02;
  std::size_t n_samples = 1000;
  std::size_t max_draws = 1'000'000;
};

template <class Z>
struct AbcResult {
  std::vector<Z> samples;
  std::size_t draws = 0;
  bool starved = false;  // max_draws reached before n_samples were accepted
};

// Rejection ABC. sample_prior(rng) -> Z, simulate(z) -> X, distance(observed, x)
// -> double. Accepts z whenever distance < epsilon.
template <class SamplePrior, class Simulate, class Distance, class X, class Rng>
auto abc_reject(SamplePrior&& sample_prior, Simulate&& simulate, Distance&& distance, const X& observed,
                const AbcConfig& config, Rng& rng, Diagnostics* diagnostics = nullptr) {
  using Z = std::decay_t<decltype(sample_prior(rng))>;
  if (!(config.epsilon > 0.0)) throw Error(ErrorCode::parameter, "epsilon must be positive");
  if (config.n_samples == 0) throw Error(ErrorCode::parameter, "n_samples must be at least 1");
  AbcResult<Z> result;
  result.samples.reserve(config.n_samples);
  while (result.samples.size() < config.n_samples) {
    if (result.draws >= config.max_draws) {
      result.starved = true;
      report(diagnostics, "abc_reject: max_draws reached with " + std::to_string(result.samples.size()) +
                              " of " + std::to_string(config.n_samples) + " samples");
      break;
    }
    Z z = sample_prior(rng);
    ++result.draws;
    if (distance(observed, simulate(z)) < config.epsilon) result.samples.push_back(std::move(z));
  }
  return result;
}

}  // namespace reachabc
