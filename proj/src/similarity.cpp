#include "reachabc/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace reachabc {

WindowedMse windowed_mse(const Trajectory& observed, const Trajectory& generated, std::size_t t_index,
                         Window window) {
  if (window.w < 1) throw Error(ErrorCode::parameter, "window must hold at least one point");
  // Relative tolerance: ITRJ files store dt as f32.
  if (std::abs(observed.dt - generated.dt) > 1e-6 * std::max(observed.dt, generated.dt)) {
    throw Error(ErrorCode::alignment, "observed and generated trajectories use different dt");
  }
  if (t_index >= observed.size()) {
    throw Error(ErrorCode::parameter, "t_index beyond the observed trajectory");
  }
  if (t_index >= generated.size()) {
    throw Error(ErrorCode::alignment, "generated trajectory shorter than the observation");
  }
  const std::size_t available = t_index + 1;
  const std::size_t count = std::min<std::size_t>(available, static_cast<std::size_t>(window.w));
  double sum = 0.0;
  for (std::size_t i = available - count; i <= t_index; ++i) {
    sum += (observed[i] - generated[i]).squaredNorm();
  }
  return {sum / static_cast<double>(count), static_cast<int>(count), count < static_cast<std::size_t>(window.w)};
}

namespace {

double directed_hausdorff(std::span<const Vec3> from, std::span<const Vec3> to) {
  double worst = 0.0;
  for (const Vec3& p : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3& q : to) {
      best = std::min(best, (p - q).squaredNorm());
      if (best <= worst) break;  // cannot raise the running max
    }
    worst = std::max(worst, best);
  }
  return std::sqrt(worst);
}

void require_nonempty(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::parameter, "curve distance needs non-empty inputs");
}

}  // namespace

double hausdorff(std::span<const Vec3> a, std::span<const Vec3> b) {
  require_nonempty(a, b);
  return std::max(directed_hausdorff(a, b), directed_hausdorff(b, a));
}

double discrete_frechet(std::span<const Vec3> a, std::span<const Vec3> b) {
  require_nonempty(a, b);
  const std::size_t m = b.size();
  std::vector<double> prev(m), cur(m);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double d = (a[i] - b[j]).norm();
      if (i == 0 && j == 0) {
        cur[j] = d;
      } else if (i == 0) {
        cur[j] = std::max(cur[j - 1], d);
      } else if (j == 0) {
        cur[j] = std::max(prev[j], d);
      } else {
        cur[j] = std::max(std::min({prev[j], prev[j - 1], cur[j - 1]}), d);
      }
    }
    std::swap(prev, cur);
  }
  return prev[m - 1];
}

}  // namespace reachabc
