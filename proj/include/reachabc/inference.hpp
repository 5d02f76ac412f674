#pragma once

#include "reachabc/generator.hpp"
#include "reachabc/priors.hpp"
#include "reachabc/similarity.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace reachabc {

enum class Kernel { indicator, gaussian };

struct InferenceConfig {
  double epsilon = 0.02;    // m^2: indicator threshold / rejection tolerance
  double bandwidth = 0.05;  // m: gaussian kernel exp(-L / (2 bandwidth^2))
  int n_samples = 1000;
  long max_draws = 1'000'000;
  Window window{};
  Kernel kernel = Kernel::gaussian;
  SimilarityKind similarity = SimilarityKind::windowed_mse;
  int threads = 1;

  void validate() const;
};

/// Regular workspace discretisation; linear cell index = iy * nx + ix.
struct InferenceGrid {
  Vec2 origin{-0.65, 0.05};
  double cell_size = 0.01;
  int nx = 130;
  int ny = 70;
  Eigen::Isometry3d table_pose = Eigen::Isometry3d::Identity();

  // Optional cache: one trajectory per cell, row-major [cell][point][xyz].
  std::shared_ptr<const std::vector<float>> cache;
  int cache_points = 0;
  double cache_dt = 0.0;
  std::string generation_tag;

  static InferenceGrid for_table(const TableFrame& table, double cell_size = 0.01);

  std::size_t cells() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
  Vec2 center(std::size_t cell) const;
  Vec3 target(std::size_t cell) const;
  std::optional<std::size_t> cell_of(const Vec2& plane) const;
  int chebyshev(std::size_t a, std::size_t b) const;
  bool cached() const { return cache != nullptr; }
  std::span<const float> cached_trajectory(std::size_t cell) const;
  std::vector<Vec3> targets() const;

  void validate() const;
};

InferenceGrid build_cache(const InferenceGrid& grid, const TrajectoryGenerator& generator);

struct PosteriorEstimate {
  std::vector<double> weights;
  int nx = 0;
  int ny = 0;
  Vec2 origin = Vec2::Zero();
  double cell_size = 0.0;
  std::size_t map_cell = 0;
  Vec3 map_point = Vec3::Zero();
  double n_effective = 0.0;
  bool degenerate = false;      // evidence rejected every cell; weights are the prior
  bool partial_window = false;  // fewer than w observations were available

  double credible_mass_at(std::span<const std::size_t> cells) const;
  double entropy() const;
};

// Posterior over grid cells: weight_i ~ prior(z_i) * K(L_i). Uses the grid's
// cache when present (ErrorCode::stale_cache if its tag differs from the
// generator's), otherwise generates every cell without caching.
PosteriorEstimate grid_posterior(const InferenceGrid& grid, const PriorSpec& prior,
                                 const TrajectoryGenerator& generator, const InferenceConfig& config,
                                 const Trajectory& observed, std::size_t t_index,
                                 Diagnostics* diagnostics = nullptr);

// Same computation on caller-supplied prior densities per cell (skips
// re-evaluating the prior when it is shared across steps).
PosteriorEstimate grid_posterior(const InferenceGrid& grid, std::span<const double> prior_density,
                                 const TrajectoryGenerator& generator, const InferenceConfig& config,
                                 const Trajectory& observed, std::size_t t_index,
                                 Diagnostics* diagnostics = nullptr);

std::vector<double> prior_on_grid(const InferenceGrid& grid, const PriorSpec& prior);
// The prior alone, normalised over the grid (no evidence yet).
PosteriorEstimate prior_estimate(const InferenceGrid& grid, std::span<const double> prior_density);

struct ObjectProbability {
  int id = 0;
  double probability = 0.0;
};

// Posterior mass within conflict_radius of each object (table plane). The
// discs can overlap, so the values need not sum to one.
std::vector<ObjectProbability> decision_summary(const PosteriorEstimate& posterior, const InferenceGrid& grid,
                                                const Scene& scene, double conflict_radius);

nlohmann::json posterior_to_json(const PosteriorEstimate& posterior);
void write_ipos(const std::filesystem::path& path, const PosteriorEstimate& posterior);
// Reads grid metadata + weights back (weights are f32 on disk).
PosteriorEstimate read_ipos(const std::filesystem::path& path);

}  // namespace reachabc
