#include "reachabc/inference.hpp"
#include "reachabc/priors.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

namespace reachabc {
namespace {

double grid_mass(const PriorSpec& prior) {
  const InferenceGrid grid = InferenceGrid::for_table(TableFrame{});
  double mass = 0.0;
  for (double d : prior_on_grid(grid, prior)) mass += d * grid.cell_size * grid.cell_size;
  return mass;
}

TEST(ProximityPrior, PeakAndRatio) {
  const Vec2 origin(0.0, 0.3);
  const PriorSpec p = proximity_prior(origin);
  const double peak = evaluate(p, origin);
  EXPECT_GT(peak, evaluate(p, origin + Vec2(0.01, 0.0)));
  EXPECT_GT(peak, evaluate(p, origin + Vec2(0.0, -0.01)));
  EXPECT_NEAR(evaluate(p, origin + Vec2(0.5, 0.0)) / peak, std::exp(-0.25 / 0.2), 1e-12);
  EXPECT_NEAR(std::exp(-0.25 / 0.2), 0.2865, 1e-4);
}

TEST(ProximityPrior, SampleMean) {
  const Vec2 origin(-0.2, 0.1);
  const PriorSpec p = proximity_prior(origin);
  Rng rng(5);
  Vec2 sum = Vec2::Zero();
  for (int i = 0; i < 10000; ++i) sum += sample(p, rng);
  const Vec2 mean = sum / 10000.0;
  EXPECT_NEAR(mean.x(), origin.x(), 0.02);
  EXPECT_NEAR(mean.y(), origin.y(), 0.02);
}

TEST(ProximityPrior, MeanSamplesFollowCovariance) {
  // Squared Mahalanobis distances of samples are chi-square with 2 dof:
  // P(d^2 <= r) = 1 - exp(-r/2).
  const Mat2 cov = (Mat2() << 0.04, 0.01, 0.01, 0.02).finished();
  const PriorSpec p = PriorSpec::gaussian(PriorVariant::proximity, Vec2(0.1, 0.2), cov);
  const Mat2 inv = cov.inverse();
  Rng rng(11);
  const int n = 20000;
  const double cuts[] = {0.5, 1.0, 2.0, 4.0};
  int counts[4] = {};
  for (int i = 0; i < n; ++i) {
    const Vec2 d = sample(p, rng) - Vec2(0.1, 0.2);
    const double m = d.dot(inv * d);
    for (int k = 0; k < 4; ++k) counts[k] += m <= cuts[k];
  }
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(counts[k] / double(n), 1.0 - std::exp(-cuts[k] / 2.0), 0.015);
}

TEST(GazePrior, IdenticalPointsGiveRegulariser) {
  GazeBuffer buffer;
  for (int i = 0; i < 9; ++i) buffer.push(i / 30.0, Vec2(0.1, 0.4));
  const PriorSpec p = gaze_prior(buffer, 8 / 30.0);
  ASSERT_EQ(p.components().size(), 1u);
  const auto& g = p.components().front().gaussian;
  EXPECT_LT((g.mean() - Vec2(0.1, 0.4)).norm(), 1e-12);
  EXPECT_LT((g.cov() - kGazeRegulariser * Mat2::Identity()).norm(), 1e-15);
}

TEST(GazePrior, AlternatingPointsCovariance) {
  GazeBuffer buffer;
  for (int i = 0; i < 8; ++i) buffer.push(i / 30.0, i % 2 ? Vec2(0.1, 0.0) : Vec2(0.0, 0.0));
  const PriorSpec p = gaze_prior(buffer, 7 / 30.0);
  const auto& g = p.components().front().gaussian;
  EXPECT_LT((g.mean() - Vec2(0.05, 0.0)).norm(), 1e-12);
  // Unbiased variance of 4 zeros and 4 tenths: 8 * 0.0025 / 7.
  const double var = 8.0 * 0.0025 / 7.0;
  EXPECT_NEAR(g.cov()(0, 0), var + 1e-4, 1e-12);
  EXPECT_NEAR(g.cov()(1, 1), 1e-4, 1e-15);
  EXPECT_NEAR(g.cov()(0, 1), 0.0, 1e-15);
}

TEST(GazePrior, LargeSampleCovarianceApproaches0025) {
  GazeBuffer buffer(10.0);
  for (int i = 0; i < 600; ++i) buffer.push(i * 0.0005, i % 2 ? Vec2(0.1, 0.0) : Vec2(0.0, 0.0));
  const PriorSpec p = gaze_prior(buffer, 599 * 0.0005);
  const auto& g = p.components().front().gaussian;
  EXPECT_NEAR(g.cov()(0, 0), 0.0025 + 1e-4, 1e-5);
}

TEST(GazePrior, StalePointIgnored) {
  GazeBuffer a, b;
  b.push(0.69, Vec2(0.5, 0.5));  // now - 0.31
  for (int i = 0; i < 5; ++i) {
    a.push(0.75 + i * 0.05, Vec2(0.01 * i, 0.2));
    b.push(0.75 + i * 0.05, Vec2(0.01 * i, 0.2));
  }
  const auto& ga = gaze_prior(a, 1.0).components().front().gaussian;
  const auto& gb = gaze_prior(b, 1.0).components().front().gaussian;
  EXPECT_EQ(ga.mean(), gb.mean());
  EXPECT_EQ(ga.cov(), gb.cov());
}

TEST(GazePrior, InsufficientData) {
  GazeBuffer buffer;
  buffer.push(0.0, Vec2::Zero());
  try {
    gaze_prior(buffer, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::insufficient_data);
  }
}

TEST(GazeBuffer, RejectsNonIncreasingTime) {
  GazeBuffer buffer;
  buffer.push(1.0, Vec2::Zero());
  EXPECT_THROW(buffer.push(1.0, Vec2::Zero()), Error);
}

TEST(ObjectsPrior, SingleObject) {
  Scene scene = default_scene();
  scene.objects.resize(1);
  const PriorSpec p = objects_prior(scene);
  ASSERT_EQ(p.components().size(), 1u);
  EXPECT_LT((p.components()[0].gaussian.mean() - scene.table.to_plane(scene.objects[0].position)).norm(), 1e-12);
}

TEST(ObjectsPrior, EqualConfidencesGiveEqualPeaks) {
  Scene scene = default_scene();
  scene.objects.resize(2);
  scene.objects[0].confidence = 0.5;
  scene.objects[1].confidence = 0.5;
  const PriorSpec p = objects_prior(scene);
  EXPECT_DOUBLE_EQ(p.components()[0].weight, 0.5);
  EXPECT_DOUBLE_EQ(p.components()[1].weight, 0.5);
  const Vec2 a = scene.table.to_plane(scene.objects[0].position);
  const Vec2 b = scene.table.to_plane(scene.objects[1].position);
  EXPECT_NEAR(evaluate(p, a), evaluate(p, b), 1e-9 * evaluate(p, a));
}

TEST(ObjectsPrior, SixteenUniformWeights) {
  const PriorSpec p = objects_prior(default_scene());
  ASSERT_EQ(p.components().size(), 16u);
  for (const auto& c : p.components()) EXPECT_NEAR(c.weight, 1.0 / 16.0, 1e-15);
}

TEST(ObjectsPrior, EmptySceneError) {
  Scene scene = default_scene();
  scene.objects.clear();
  try {
    objects_prior(scene);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::empty_scene);
  }
}

TEST(Mixture, SingleChildIsIdentity) {
  const PriorSpec child = proximity_prior(Vec2(0.0, 0.3));
  const PriorSpec m = mixture({child}, {1.0});
  for (double x = -0.6; x <= 0.6; x += 0.05) {
    for (double y = 0.05; y <= 0.75; y += 0.05) {
      EXPECT_NEAR(evaluate(m, Vec2(x, y)), evaluate(child, Vec2(x, y)), 1e-12);
    }
  }
}

TEST(Mixture, WeightsNormalised) {
  const PriorSpec m = mixture({proximity_prior(Vec2(0.0, 0.3)), proximity_prior(Vec2(0.2, 0.3))}, {2.0, 2.0});
  EXPECT_DOUBLE_EQ(m.weights()[0], 0.5);
  EXPECT_DOUBLE_EQ(m.weights()[1], 0.5);
}

TEST(Mixture, RejectsBadWeights) {
  EXPECT_THROW(mixture({proximity_prior(Vec2::Zero())}, {-1.0}), Error);
  EXPECT_THROW(mixture({proximity_prior(Vec2::Zero())}, {1.0, 1.0}), Error);
}

TEST(Mixture, IntegratesToOneOnGrid) {
  const Scene scene = default_scene();
  GazeBuffer buffer;
  for (int i = 0; i < 9; ++i) buffer.push(i / 30.0, Vec2(0.1 + 0.002 * i, 0.4));
  const PriorSpec p = mixture({objects_prior(scene), gaze_prior(buffer, 8 / 30.0)}, {0.5, 0.5});
  EXPECT_NEAR(grid_mass(p), 1.0, 0.01);
}

TEST(CombinedPrior, GazeDroppedWithoutData) {
  const Scene scene = default_scene();
  GazeBuffer empty;
  const PriorSpec p = combined_prior(scene, Vec2(0.0, 0.4), &empty, 0.0);
  ASSERT_EQ(p.weights().size(), 2u);
  EXPECT_NEAR(p.weights()[0], 0.2 / 0.6, 1e-12);
  EXPECT_NEAR(p.weights()[1], 0.4 / 0.6, 1e-12);
}

TEST(CombinedPrior, ObjectAndGazeCuesKeepMassOnTable) {
  const Scene scene = default_scene();
  GazeBuffer buffer;
  for (int i = 0; i < 9; ++i) buffer.push(i / 30.0, Vec2(-0.1, 0.35 + 0.001 * i));
  EXPECT_GT(grid_mass(objects_prior(scene)), 0.99);
  EXPECT_GT(grid_mass(gaze_prior(buffer, 8 / 30.0)), 0.99);
  PriorWeights w;
  w.proximity = 0.0;
  EXPECT_GT(grid_mass(combined_prior(scene, Vec2(0.0, 0.4), &buffer, 8 / 30.0, w)), 0.99);
}

TEST(Evaluate, ClosedFormAtMean) {
  const Mat2 cov = (Mat2() << 0.02, 0.005, 0.005, 0.01).finished();
  const PriorSpec p = PriorSpec::gaussian(PriorVariant::proximity, Vec2(0.1, 0.2), cov);
  EXPECT_NEAR(evaluate(p, Vec2(0.1, 0.2)), 1.0 / (2.0 * std::numbers::pi * std::sqrt(cov.determinant())), 1e-9);
}

TEST(Evaluate, GmmIsWeightedSum) {
  const Scene scene = default_scene();
  const PriorSpec p = objects_prior(scene);
  const Vec2 z(0.05, 0.33);
  double sum = 0.0;
  for (const auto& c : p.components()) sum += c.weight * c.gaussian.density(z);
  EXPECT_NEAR(evaluate(p, z), sum, 1e-12 * sum);
}

TEST(Sample, SeedReproducible) {
  const PriorSpec p = objects_prior(default_scene());
  EXPECT_EQ(sample(p, 77), sample(p, 77));
  EXPECT_NE(sample(p, 77), sample(p, 78));
}

TEST(Gaussian2, RejectsNonSpd) {
  EXPECT_THROW(Gaussian2(Vec2::Zero(), (Mat2() << 1.0, 2.0, 2.0, 1.0).finished()), Error);
}

TEST(PriorSpec, JsonRoundTrip) {
  GazeBuffer buffer;
  for (int i = 0; i < 5; ++i) buffer.push(i / 30.0, Vec2(0.01 * i, 0.3));
  const PriorSpec p = combined_prior(default_scene(), Vec2(-0.2, 0.12), &buffer, 4 / 30.0);
  nlohmann::json j = p;
  const PriorSpec back = j.get<PriorSpec>();
  for (double x = -0.5; x <= 0.5; x += 0.1) EXPECT_NEAR(evaluate(back, Vec2(x, 0.4)), evaluate(p, Vec2(x, 0.4)), 1e-9);
}

}  // namespace
}  // namespace reachabc
