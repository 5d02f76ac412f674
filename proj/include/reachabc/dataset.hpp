#pragma once

#include "reachabc/controller.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace reachabc {

// In-memory trajectory dataset: `targets` is count x 3 and `points` is
// count x (3 * points_per_trajectory), both row-major f32, matching the ITRJ
// record layout.
struct TrajectoryDataset {
  std::uint32_t points_per_trajectory = kTrajectoryPoints;
  float dt = static_cast<float>(kSampleDt);
  std::vector<float> targets;
  std::vector<float> points;

  std::size_t count() const { return targets.size() / 3; }
  std::span<const float> record_points(std::size_t i) const;
  Vec3 target(std::size_t i) const;
  Trajectory trajectory(std::size_t i) const;
  void append(const Vec3& target, const Trajectory& trajectory);
};

inline constexpr std::uint32_t kDatasetVersion = 1;

void write_itrj(const std::filesystem::path& path, const TrajectoryDataset& data);
// Throws bad_magic / truncated / io.
TrajectoryDataset read_itrj(const std::filesystem::path& path);

// One {"target":[x,y,z],"points":[[x,y,z],...]} object per line.
void write_jsonl(const std::filesystem::path& path, const TrajectoryDataset& data);
TrajectoryDataset read_jsonl(const std::filesystem::path& path);

struct DatasetRecipe {
  std::size_t count = 10000;
  std::uint64_t seed = 0;
};

// Uniform targets over the workspace rectangle at table height, seeded.
std::vector<Vec3> sample_workspace_targets(const Scene& scene, std::size_t count, std::uint64_t seed);

TrajectoryDataset generate_dataset(const ArmModel& model, const ControllerGains& gains, const Scene& scene,
                                   const DatasetRecipe& recipe);

// Generation context written beside the binary file (start posture, seed,
// geometry) since the ITRJ header carries only the record layout.
nlohmann::json dataset_metadata(const ArmModel& model, const ControllerGains& gains, const Scene& scene,
                                const DatasetRecipe& recipe);

}  // namespace reachabc
