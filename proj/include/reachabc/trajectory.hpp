#pragma once

#include "reachabc/common.hpp"

#include <vector>

namespace reachabc {

inline constexpr double kSampleRate = 30.0;
inline constexpr double kSampleDt = 1.0 / kSampleRate;
inline constexpr int kTrajectoryPoints = 90;

// Time-stamped hand path, index 0 at t0 (motion onset).
struct Trajectory {
  std::vector<Vec3> points;
  double dt = kSampleDt;
  double t0 = 0.0;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  const Vec3& operator[](std::size_t i) const { return points[i]; }
  double time_at(std::size_t i) const { return t0 + dt * static_cast<double>(i); }
};

}  // namespace reachabc
