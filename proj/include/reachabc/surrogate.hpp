#pragma once

#include "reachabc/dataset.hpp"
#include "reachabc/mlp.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace reachabc {

inline const std::vector<int> kSurrogateLayers{3, 32, 64, 3 * kTrajectoryPoints};

// Target -> trajectory regressor. Inputs are mapped affinely from
// [input_min, input_max] to [-1, 1]; outputs are hand positions in metres.
class SurrogateNet {
 public:
  using Network = Mlp<float>;

  SurrogateNet();
  explicit SurrogateNet(Network net, Vec3 input_min, Vec3 input_max, std::uint64_t seed = 0);

  const Network& network() const { return net_; }
  Network& network() { return net_; }
  const Vec3& input_min() const { return input_min_; }
  const Vec3& input_max() const { return input_max_; }
  std::uint64_t seed() const { return seed_; }
  int points() const { return net_.outputs() / 3; }
  double dt() const { return kSampleDt; }

  // Throws ErrorCode::corrupt_model when any parameter is non-finite.
  Trajectory forward(const Vec3& target) const;
  std::vector<Trajectory> batch_forward(std::span<const Vec3> targets) const;
  // Row-major [target][point][xyz]; `out` must hold targets.size()*3*points().
  void batch_forward_flat(std::span<const Vec3> targets, std::span<float> out) const;

  Network::Matrix normalise(std::span<const Vec3> targets) const;

  // sha256 over the little-endian parameter blobs, layer by layer (weight then bias).
  std::string weights_hash() const;

 private:
  void check_finite() const;

  Network net_;
  Vec3 input_min_;
  Vec3 input_max_;
  std::uint64_t seed_ = 0;
};

enum class Optimizer { sgd_momentum, adam };

struct TrainConfig {
  int epochs = 500;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  Optimizer optimizer = Optimizer::adam;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  // Called after each epoch with (epoch, train loss); may be empty.
  std::function<void(int, double)> on_epoch;
};

struct TrainReport {
  int epochs = 0;
  double initial_loss = 0.0;      // m^2 per point, before the first update
  double first_epoch_loss = 0.0;  // m^2 per point, after epoch 1
  double train_loss = 0.0;
  double test_loss = 0.0;
  double test_mean_point_error = 0.0;  // m
  double train_fraction = 0.8;
  double test_fraction = 0.2;
  std::size_t train_count = 0;
  std::size_t test_count = 0;
  std::uint64_t seed = 0;
  double seconds = 0.0;
};

struct TrainResult {
  SurrogateNet net;
  TrainReport report;
};

// Throws ErrorCode::parameter for datasets under 1,000 records (unless
// `allow_small` is set for tests) and ErrorCode::training_divergence when the
// loss becomes non-finite.
TrainResult train(const TrajectoryDataset& data, const TrainConfig& config, bool allow_small = false);

// Mean Euclidean per-point error of the surrogate on records [begin, end).
double mean_point_error(const SurrogateNet& net, const TrajectoryDataset& data, std::span<const std::size_t> records);

inline constexpr int kWeightsVersion = 1;

void save_weights(const SurrogateNet& net, const std::filesystem::path& path);
// Throws bad_magic / shape_mismatch / truncated / corrupt_model / io.
SurrogateNet load_weights(const std::filesystem::path& path);

}  // namespace reachabc
