#pragma once

#include "reachabc/trajectory.hpp"

#include <span>

namespace reachabc {

struct Window {
  int w = 10;
};

struct WindowedMse {
  double value = 0.0;
  int points_used = 0;
  bool partial = false;  // fewer than w observations available so far
};

// Mean squared point distance over the last w observations ending at
// t_index. Both trajectories are onset-aligned (index 0 = motion onset).
WindowedMse windowed_mse(const Trajectory& observed, const Trajectory& generated, std::size_t t_index,
                         Window window = {});

double hausdorff(std::span<const Vec3> a, std::span<const Vec3> b);
double discrete_frechet(std::span<const Vec3> a, std::span<const Vec3> b);

enum class SimilarityKind { windowed_mse, hausdorff, frechet };

}  // namespace reachabc
