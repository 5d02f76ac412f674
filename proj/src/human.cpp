#include "reachabc/task.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace reachabc {

std::string to_string(Agent agent) { return agent == Agent::human ? "human" : "robot"; }

std::string to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::reach: return "reach";
    case ActionKind::grasp: return "grasp";
    case ActionKind::transport: return "transport";
    case ActionKind::release: return "release";
    case ActionKind::retreat: return "retreat";
  }
  return "unknown";
}

Trajectory truncate_reach(const Trajectory& reach, double stop_speed) {
  if (reach.size() < 2) return reach;
  std::vector<double> speed(reach.size(), 0.0);
  for (std::size_t i = 1; i < reach.size(); ++i) speed[i] = (reach[i] - reach[i - 1]).norm() / reach.dt;
  const auto peak = static_cast<std::size_t>(std::max_element(speed.begin(), speed.end()) - speed.begin());
  std::size_t end = reach.size() - 1;
  for (std::size_t i = peak + 1; i < reach.size(); ++i) {
    if (speed[i] < stop_speed) {
      end = i;
      break;
    }
  }
  Trajectory out = reach;
  out.points.resize(end + 1);
  return out;
}

namespace {

// Continuous hand path assembled from phases.
struct PathSegment {
  double t0 = 0.0;
  double t1 = 0.0;
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::Zero();
  const Trajectory* samples = nullptr;  // reach: interpolate generator points

  Vec3 at(double t) const {
    if (samples) {
      const double u = std::clamp((t - t0) / samples->dt, 0.0, static_cast<double>(samples->size() - 1));
      const auto i = static_cast<std::size_t>(std::floor(u));
      if (i + 1 >= samples->size()) return samples->points.back();
      const double f = u - static_cast<double>(i);
      return (1.0 - f) * (*samples)[i] + f * (*samples)[i + 1];
    }
    if (t1 <= t0) return b;
    const double f = std::clamp((t - t0) / (t1 - t0), 0.0, 1.0);
    return (1.0 - f) * a + f * b;
  }
};

}  // namespace

HumanStream simulate_human(const Scene& scene, std::span<const int> targets, const TrajectoryGenerator& generator,
                           const HumanConfig& config, std::uint64_t seed) {
  HumanStream out;
  if (targets.empty()) return out;

  std::vector<Trajectory> reaches;
  reaches.reserve(targets.size());
  for (int id : targets) {
    reaches.push_back(truncate_reach(generator.generate(scene.object(id).position), config.stop_speed));
  }
  out.rest = reaches.front()[0];

  std::vector<PathSegment> path;
  std::vector<std::pair<double, double>> gaze_windows;  // [onset - lead, reach end]
  double t = 0.0;
  auto add = [&](Agent agent, ActionKind kind, double duration, std::optional<int> id, PathSegment seg) {
    seg.t0 = t;
    seg.t1 = t + duration;
    path.push_back(seg);
    out.truth.push_back({agent, kind, t, t + duration, id, false});
    if (kind == ActionKind::grasp || kind == ActionKind::release) out.events.push_back({kind, t, t + duration});
    t += duration;
  };
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const Trajectory& r = reaches[k];
    const Vec3 grasp_at = r.points.back();
    const double reach_time = r.dt * static_cast<double>(r.size() - 1);
    gaze_windows.emplace_back(t - config.gaze_lead, t + reach_time);
    PathSegment reach_seg;
    reach_seg.samples = &r;
    add(Agent::human, ActionKind::reach, reach_time, targets[k], reach_seg);
    add(Agent::human, ActionKind::grasp, config.grasp_time, targets[k], {0, 0, grasp_at, grasp_at, nullptr});
    const Vec3 box = scene.box_position;
    add(Agent::human, ActionKind::transport, (box - grasp_at).norm() / config.transport_speed, targets[k],
        {0, 0, grasp_at, box, nullptr});
    add(Agent::human, ActionKind::release, config.release_time, targets[k], {0, 0, box, box, nullptr});
    add(Agent::human, ActionKind::retreat, (out.rest - box).norm() / config.retreat_speed, std::nullopt,
        {0, 0, box, out.rest, nullptr});
  }

  Rng rng(seed);
  std::normal_distribution<double> hand_noise(0.0, config.noise_sigma);
  std::normal_distribution<double> gaze_noise(0.0, config.gaze_sigma);
  const double dt = reaches.front().dt;
  const auto samples = static_cast<std::size_t>(std::floor(t / dt + 1e-9)) + 1;
  out.hand.dt = dt;
  out.hand.points.reserve(samples);
  std::size_t seg = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    const double ti = dt * static_cast<double>(i);
    while (seg + 1 < path.size() && ti >= path[seg].t1) ++seg;
    const Vec3 p = path[seg].at(ti);
    Vec3 noisy = p;
    if (config.noise_sigma > 0.0) noisy += Vec3(hand_noise(rng), hand_noise(rng), hand_noise(rng));
    out.hand.points.push_back(noisy);

    Vec2 look = scene.table.to_plane(p);
    for (std::size_t k = 0; k < gaze_windows.size(); ++k) {
      if (ti >= gaze_windows[k].first && ti <= gaze_windows[k].second) {
        look = scene.table.to_plane(scene.object(targets[k]).position);
        break;
      }
    }
    out.gaze.push_back({ti, look + Vec2(gaze_noise(rng), gaze_noise(rng))});
  }
  return out;
}

Segmentation segment_phases(const Trajectory& hand, std::span<const ManipulationEvent> events,
                            const SegmentationConfig& config, Diagnostics* diagnostics) {
  Segmentation out;
  const std::size_t n = hand.size();
  if (n < 2) {
    report(diagnostics, "segmentation: stream too short");
    return out;
  }
  const double dt = hand.dt;
  const double span = dt * static_cast<double>(n - 1);

  const int half = std::max(0, config.smoothing / 2);
  std::vector<Vec3> smooth(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= static_cast<std::size_t>(half) ? i - static_cast<std::size_t>(half) : 0;
    const std::size_t hi = std::min(n - 1, i + static_cast<std::size_t>(half));
    Vec3 sum = Vec3::Zero();
    for (std::size_t j = lo; j <= hi; ++j) sum += hand[j];
    smooth[i] = sum / static_cast<double>(hi - lo + 1);
  }
  // above[i] describes the interval [i-1, i].
  std::vector<bool> above(n, false);
  for (std::size_t i = 1; i < n; ++i) above[i] = (smooth[i] - smooth[i - 1]).norm() / dt >= config.speed_threshold;

  const auto hold = static_cast<std::size_t>(std::max(1.0, std::round(config.hysteresis / dt)));
  std::vector<std::pair<std::size_t, std::size_t>> bouts;  // sample indices [start, end]
  bool moving = false;
  std::size_t start = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (above[i] == moving) continue;
    bool persists = true;
    for (std::size_t j = i; j < std::min(n, i + hold); ++j) persists = persists && above[j] != moving;
    if (!persists) continue;
    if (!moving) {
      start = i - 1;
    } else {
      bouts.emplace_back(start, i - 1);
    }
    moving = !moving;
  }
  if (moving) bouts.emplace_back(start, n - 1);

  if (bouts.empty()) report(diagnostics, "segmentation: no motion detected");

  std::vector<ManipulationEvent> sorted(events.begin(), events.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.t_start < b.t_start; });
  auto time_of = [&](std::size_t i) { return hand.t0 + dt * static_cast<double>(i); };
  auto index_of = [&](double t) {
    return std::min(n - 1, static_cast<std::size_t>(std::max(0.0, std::round((t - hand.t0) / dt))));
  };

  // Grasp and release intervals are actions in their own right: motion
  // bouts are cut at them, and bout edges detected a few samples away from
  // an event (smoothing lag, sensor noise) snap onto the event boundary.
  const double snap = static_cast<double>(half + hold) * dt;
  struct Piece {
    double a, b;
  };
  std::vector<Piece> pieces;
  for (const auto& [s, e] : bouts) {
    std::vector<Piece> parts{{time_of(s), time_of(e)}};
    for (const auto& ev : sorted) {
      std::vector<Piece> next;
      for (const Piece& p : parts) {
        if (ev.t_end <= p.a || ev.t_start >= p.b) {
          next.push_back(p);
          continue;
        }
        if (ev.t_start > p.a) next.push_back({p.a, ev.t_start});
        if (ev.t_end < p.b) next.push_back({ev.t_end, p.b});
      }
      parts = std::move(next);
    }
    for (Piece p : parts) {
      for (const auto& ev : sorted) {
        if (std::abs(p.a - ev.t_end) <= snap) p.a = ev.t_end;
        if (std::abs(p.b - ev.t_start) <= snap) p.b = ev.t_start;
      }
      if (p.b - p.a >= config.hysteresis) pieces.push_back(p);
    }
  }

  const double tol = 1e-9;
  auto push = [&](ActionKind kind, double a, double b) {
    if (b > a) out.actions.push_back({Agent::human, kind, a, b, std::nullopt, false});
  };
  for (const Piece& piece : pieces) {
    const double ts = piece.a, te = piece.b;
    const ManipulationEvent* prev = nullptr;
    const ManipulationEvent* next = nullptr;
    for (const auto& ev : sorted) {
      if (ev.t_end <= ts + snap) prev = &ev;
      if (!next && ev.t_start >= te - tol) next = &ev;
    }
    const bool after_grasp = prev && prev->kind == ActionKind::grasp;
    const bool after_release = prev && prev->kind == ActionKind::release;
    const bool before_grasp = next && next->kind == ActionKind::grasp;
    if (after_grasp) {
      push(ActionKind::transport, ts, te);
    } else if (after_release && before_grasp) {
      const std::size_t s = index_of(ts), e = index_of(te);
      double split = te;
      if (config.rest) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t at = e;
        for (std::size_t i = s; i <= e; ++i) {
          const double d = (hand[i] - *config.rest).norm();
          if (d < best) {
            best = d;
            at = i;
          }
        }
        if (best <= config.rest_tolerance) split = time_of(at);
      }
      push(ActionKind::retreat, ts, split);
      push(ActionKind::reach, split, te);
    } else if (after_release) {
      push(ActionKind::retreat, ts, te);
    } else {
      if (!before_grasp) report(diagnostics, "segmentation: motion without grasp context labelled as reach");
      push(ActionKind::reach, ts, te);
    }
  }
  for (const auto& ev : sorted) push(ev.kind, ev.t_start, ev.t_end);
  std::sort(out.actions.begin(), out.actions.end(),
            [](const AtomicAction& a, const AtomicAction& b) { return a.t_start < b.t_start; });
  double busy = 0.0;
  for (const auto& a : out.actions) busy += a.duration();
  out.idle = span - busy;
  return out;
}

}  // namespace reachabc
