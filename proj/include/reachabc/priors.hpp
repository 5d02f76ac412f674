#pragma once

#include "reachabc/common.hpp"
#include "reachabc/scene.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <deque>
#include <random>
#include <span>
#include <vector>

namespace reachabc {

using Rng = std::mt19937_64;

// Bivariate normal on the table plane with cached inverse and normaliser.
class Gaussian2 {
 public:
  Gaussian2() = default;
  // Throws ErrorCode::parameter unless cov is symmetric positive-definite.
  Gaussian2(const Vec2& mean, const Mat2& cov);

  const Vec2& mean() const { return mean_; }
  const Mat2& cov() const { return cov_; }

  double density(const Vec2& z) const;
  Vec2 sample(Rng& rng) const;

 private:
  Vec2 mean_ = Vec2::Zero();
  Mat2 cov_ = Mat2::Identity();
  Mat2 precision_ = Mat2::Identity();
  Mat2 chol_ = Mat2::Identity();
  double norm_ = 0.0;
};

enum class PriorVariant { proximity, gaze, objects, mixture };

const char* to_string(PriorVariant v);

struct WeightedGaussian {
  double weight = 1.0;
  Gaussian2 gaussian;
};

/// Density over the table plane. proximity and gaze hold a single Gaussian;
/// objects holds one weighted component per object; mixture holds child
/// specs with normalised weights.
class PriorSpec {
 public:
  PriorVariant variant() const { return variant_; }
  const std::vector<WeightedGaussian>& components() const { return components_; }
  const std::vector<PriorSpec>& children() const { return children_; }
  const std::vector<double>& weights() const { return weights_; }

  static PriorSpec gaussian(PriorVariant variant, const Vec2& mean, const Mat2& cov);
  static PriorSpec gmm(std::vector<WeightedGaussian> components);
  static PriorSpec mix(std::vector<PriorSpec> children, std::vector<double> weights);

 private:
  PriorVariant variant_ = PriorVariant::proximity;
  std::vector<WeightedGaussian> components_;
  std::vector<PriorSpec> children_;
  std::vector<double> weights_;
};

struct TimedPoint {
  double t = 0.0;
  Vec2 p = Vec2::Zero();
};

// Recent gaze/table intersections. Single writer; readers copy.
class GazeBuffer {
 public:
  static constexpr double kWindow = 0.3;

  explicit GazeBuffer(double retain = 1.0) : retain_(retain) {}

  // Timestamps must be strictly increasing (ErrorCode::parameter otherwise).
  void push(double t, const Vec2& p);
  void clear() { entries_.clear(); }
  std::size_t size() const { return entries_.size(); }
  std::vector<TimedPoint> window(double now, double span = kWindow) const;

 private:
  double retain_;
  std::deque<TimedPoint> entries_;
};

inline constexpr double kPerceptionSigma = 0.005;  // m
inline constexpr double kGazeRegulariser = 1e-4;   // m^2

PriorSpec proximity_prior(const Vec2& human_origin, const Mat2& scale = 0.1 * Mat2::Identity());
// Throws ErrorCode::insufficient_data with fewer than two in-window points.
PriorSpec gaze_prior(const GazeBuffer& buffer, double now, double scale = 1.0);
// Throws ErrorCode::empty_scene for an empty scene.
PriorSpec objects_prior(const Scene& scene);
PriorSpec mixture(std::vector<PriorSpec> children, std::vector<double> weights);

double evaluate(const PriorSpec& prior, const Vec2& z);
Vec2 sample(const PriorSpec& prior, Rng& rng);
Vec2 sample(const PriorSpec& prior, std::uint64_t seed);

struct PriorWeights {
  double proximity = 0.2;
  double gaze = 0.4;
  double objects = 0.4;
};

// The runtime prior: weighted mixture of whichever cues are available. The
// gaze cue is dropped (and the remaining weights renormalised) when the
// buffer lacks in-window data.
PriorSpec combined_prior(const Scene& scene, const Vec2& human_origin, const GazeBuffer* gaze,
                         double now, const PriorWeights& weights = {});

void to_json(nlohmann::json& j, const PriorSpec& prior);
void from_json(const nlohmann::json& j, PriorSpec& prior);

}  // namespace reachabc
