#include "reachabc/similarity.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <random>

namespace reachabc {
namespace {

Trajectory line(int n, const Vec3& step, const Vec3& offset = Vec3::Zero()) {
  Trajectory t;
  for (int i = 0; i < n; ++i) t.points.push_back(offset + step * i);
  return t;
}

TEST(WindowedMse, IdenticalIsZero) {
  const Trajectory a = line(90, Vec3(0.01, 0.002, 0.0));
  const WindowedMse m = windowed_mse(a, a, 40);
  EXPECT_EQ(m.value, 0.0);
  EXPECT_EQ(m.points_used, 10);
  EXPECT_FALSE(m.partial);
}

TEST(WindowedMse, ConstantOffsetOnEveryAxis) {
  const double d = 0.013;
  const Trajectory a = line(90, Vec3(0.01, 0.0, 0.0));
  const Trajectory b = line(90, Vec3(0.01, 0.0, 0.0), Vec3(d, d, d));
  EXPECT_NEAR(windowed_mse(a, b, 60).value, 3.0 * d * d, 1e-15);
}

TEST(WindowedMse, HandWorkedWindowOfTwo) {
  Trajectory observed;
  observed.points = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
  Trajectory generated;
  generated.points = {Vec3(0, 0, 0), Vec3(0, 0, 0)};
  EXPECT_DOUBLE_EQ(windowed_mse(observed, generated, 1, Window{2}).value, 0.5);
}

TEST(WindowedMse, PartialWindowFlagged) {
  const Trajectory a = line(90, Vec3(0.01, 0.0, 0.0));
  const WindowedMse m = windowed_mse(a, a, 3);
  EXPECT_TRUE(m.partial);
  EXPECT_EQ(m.points_used, 4);
}

TEST(WindowedMse, AlignmentErrors) {
  const Trajectory a = line(90, Vec3(0.01, 0.0, 0.0));
  Trajectory b = a;
  b.dt = 0.05;
  try {
    windowed_mse(a, b, 10);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::alignment);
  }
  const Trajectory shortened = line(20, Vec3(0.01, 0.0, 0.0));
  try {
    windowed_mse(a, shortened, 40);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::alignment);
  }
  EXPECT_THROW(windowed_mse(shortened, a, 40), Error);
}

TEST(CurveDistances, IdenticalAndSingletons) {
  const Trajectory a = line(30, Vec3(0.01, 0.02, 0.0));
  EXPECT_EQ(hausdorff(a.points, a.points), 0.0);
  EXPECT_EQ(discrete_frechet(a.points, a.points), 0.0);
  const std::vector<Vec3> p{Vec3(0, 0, 0)}, q{Vec3(1, 0, 0)};
  EXPECT_DOUBLE_EQ(hausdorff(p, q), 1.0);
  EXPECT_DOUBLE_EQ(discrete_frechet(p, q), 1.0);
}

TEST(CurveDistances, EmptyInputRejected) {
  const std::vector<Vec3> p{Vec3::Zero()}, none;
  EXPECT_THROW(hausdorff(p, none), Error);
  EXPECT_THROW(discrete_frechet(none, p), Error);
}

std::vector<Vec3> random_curve(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> step(0.0, 0.05);
  std::vector<Vec3> c{Vec3::Zero()};
  for (int i = 1; i < n; ++i) c.push_back(c.back() + Vec3(step(rng), step(rng), step(rng)));
  return c;
}

TEST(CurveDistances, FrechetDominatesHausdorff) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = random_curve(rng, 5 + trial % 20);
    const auto b = random_curve(rng, 3 + trial % 17);
    EXPECT_GE(discrete_frechet(a, b), hausdorff(a, b) - 1e-15);
  }
}

// Minimum over all monotone couplings, enumerated recursively.
double brute_frechet(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  double best = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i, std::size_t j, double worst) {
    worst = std::max(worst, (a[i] - b[j]).norm());
    if (worst >= best) return;
    if (i + 1 == a.size() && j + 1 == b.size()) {
      best = worst;
      return;
    }
    if (i + 1 < a.size()) walk(i + 1, j, worst);
    if (j + 1 < b.size()) walk(i, j + 1, worst);
    if (i + 1 < a.size() && j + 1 < b.size()) walk(i + 1, j + 1, worst);
  };
  walk(0, 0, 0.0);
  return best;
}

TEST(CurveDistances, FrechetMatchesBruteForce) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = random_curve(rng, 2 + trial % 6);
    const auto b = random_curve(rng, 1 + trial % 7);
    EXPECT_DOUBLE_EQ(discrete_frechet(a, b), brute_frechet(a, b));
  }
}

}  // namespace
}  // namespace reachabc
