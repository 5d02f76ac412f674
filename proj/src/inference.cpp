#include "reachabc/inference.hpp"

#include "reachabc/codec.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <thread>

namespace reachabc {

void InferenceConfig::validate() const {
  if (!(epsilon > 0.0)) throw Error(ErrorCode::parameter, "epsilon must be positive");
  if (!(bandwidth > 0.0)) throw Error(ErrorCode::parameter, "kernel bandwidth must be positive");
  if (n_samples < 1) throw Error(ErrorCode::parameter, "n_samples must be at least 1");
  if (max_draws < n_samples) throw Error(ErrorCode::parameter, "max_draws must be >= n_samples");
  if (window.w < 1) throw Error(ErrorCode::parameter, "window must hold at least one point");
  if (threads < 1) throw Error(ErrorCode::parameter, "threads must be at least 1");
}

InferenceGrid InferenceGrid::for_table(const TableFrame& table, double cell_size) {
  InferenceGrid g;
  g.origin = table.origin;
  g.cell_size = cell_size;
  g.nx = static_cast<int>(std::lround(table.size.x() / cell_size));
  g.ny = static_cast<int>(std::lround(table.size.y() / cell_size));
  g.table_pose = table.pose;
  g.validate();
  return g;
}

Vec2 InferenceGrid::center(std::size_t cell) const {
  const auto ix = static_cast<double>(cell % static_cast<std::size_t>(nx));
  const auto iy = static_cast<double>(cell / static_cast<std::size_t>(nx));
  return origin + cell_size * Vec2(ix + 0.5, iy + 0.5);
}

Vec3 InferenceGrid::target(std::size_t cell) const {
  const Vec2 c = center(cell);
  return table_pose * Vec3(c.x(), c.y(), 0.0);
}

std::optional<std::size_t> InferenceGrid::cell_of(const Vec2& plane) const {
  const Vec2 rel = (plane - origin) / cell_size;
  const auto ix = static_cast<long>(std::floor(rel.x()));
  const auto iy = static_cast<long>(std::floor(rel.y()));
  if (ix < 0 || iy < 0 || ix >= nx || iy >= ny) return std::nullopt;
  return static_cast<std::size_t>(iy) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(ix);
}

int InferenceGrid::chebyshev(std::size_t a, std::size_t b) const {
  const auto n = static_cast<long>(nx);
  const long ax = static_cast<long>(a) % n, ay = static_cast<long>(a) / n;
  const long bx = static_cast<long>(b) % n, by = static_cast<long>(b) / n;
  return static_cast<int>(std::max(std::abs(ax - bx), std::abs(ay - by)));
}

std::span<const float> InferenceGrid::cached_trajectory(std::size_t cell) const {
  const std::size_t stride = static_cast<std::size_t>(cache_points) * 3;
  return std::span<const float>(*cache).subspan(cell * stride, stride);
}

std::vector<Vec3> InferenceGrid::targets() const {
  std::vector<Vec3> out(cells());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = target(i);
  return out;
}

void InferenceGrid::validate() const {
  if (nx < 1 || ny < 1 || !(cell_size > 0.0)) throw Error(ErrorCode::parameter, "grid needs positive size");
  if (cache) {
    if (cache_points < 1 || cache->size() != cells() * static_cast<std::size_t>(cache_points) * 3) {
      throw Error(ErrorCode::stale_cache, "grid cache does not hold one trajectory per cell");
    }
    if (generation_tag.empty()) throw Error(ErrorCode::stale_cache, "grid cache has no generation tag");
  }
}

InferenceGrid build_cache(const InferenceGrid& grid, const TrajectoryGenerator& generator) {
  grid.validate();
  const auto targets = grid.targets();
  auto data = std::make_shared<std::vector<float>>(targets.size() * static_cast<std::size_t>(generator.points()) * 3);
  try {
    generator.generate_flat(targets, *data);
  } catch (const Error& e) {
    throw Error(e.code(), std::string("cache build failed: ") + e.what());
  }
  InferenceGrid out = grid;
  out.cache = std::move(data);
  out.cache_points = generator.points();
  out.cache_dt = generator.dt();
  out.generation_tag = generator.tag();
  return out;
}

double PosteriorEstimate::credible_mass_at(std::span<const std::size_t> cells) const {
  double mass = 0.0;
  for (std::size_t c : cells) mass += weights.at(c);
  return mass;
}

double PosteriorEstimate::entropy() const {
  double h = 0.0;
  for (double w : weights) {
    if (w > 0.0) h -= w * std::log(w);
  }
  return h;
}

std::vector<double> prior_on_grid(const InferenceGrid& grid, const PriorSpec& prior) {
  std::vector<double> out(grid.cells());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = evaluate(prior, grid.center(i));
  return out;
}

namespace {

template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || n < 2 * workers) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::jthread> pool;
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t begin = 0; begin < n; begin += chunk) {
    pool.emplace_back([&fn, begin, end = std::min(n, begin + chunk)] { fn(begin, end); });
  }
}

// Loss of every cell against the observation; index range [first, last] of
// the observation is compared (onset-aligned).
std::vector<double> cell_losses(const InferenceGrid& grid, std::span<const float> trajectories, int points,
                                double generator_dt, const InferenceConfig& config, const Trajectory& observed,
                                std::size_t t_index, bool& partial) {
  if (observed.empty()) throw Error(ErrorCode::parameter, "observation is empty");
  if (t_index >= observed.size()) throw Error(ErrorCode::parameter, "t_index beyond the observation");
  if (t_index >= static_cast<std::size_t>(points)) {
    throw Error(ErrorCode::alignment, "t_index beyond the generated horizon");
  }
  if (std::abs(observed.dt - generator_dt) > 1e-6 * std::max(observed.dt, generator_dt)) {
    throw Error(ErrorCode::alignment, "observation and generator use different dt");
  }
  const std::size_t stride = static_cast<std::size_t>(points) * 3;
  const std::size_t n = grid.cells();
  std::vector<double> loss(n);

  if (config.similarity == SimilarityKind::windowed_mse) {
    const std::size_t count = std::min<std::size_t>(t_index + 1, static_cast<std::size_t>(config.window.w));
    partial = count < static_cast<std::size_t>(config.window.w);
    const std::size_t first = t_index + 1 - count;
    std::vector<float> obs(count * 3);
    for (std::size_t k = 0; k < count; ++k) {
      for (int a = 0; a < 3; ++a) obs[3 * k + a] = static_cast<float>(observed[first + k][a]);
    }
    const double inv = 1.0 / static_cast<double>(count);
    parallel_for(n, config.threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t c = begin; c < end; ++c) {
        const float* gen = trajectories.data() + c * stride + first * 3;
        float sum = 0.0f;
        for (std::size_t k = 0; k < count * 3; ++k) {
          const float d = obs[k] - gen[k];
          sum += d * d;
        }
        loss[c] = static_cast<double>(sum) * inv;
      }
    });
    return loss;
  }

  partial = false;
  const std::span<const Vec3> obs(observed.points.data(), t_index + 1);
  parallel_for(n, config.threads, [&](std::size_t begin, std::size_t end) {
    std::vector<Vec3> gen(t_index + 1);
    for (std::size_t c = begin; c < end; ++c) {
      const float* row = trajectories.data() + c * stride;
      for (std::size_t k = 0; k <= t_index; ++k) gen[k] = Vec3(row[3 * k], row[3 * k + 1], row[3 * k + 2]);
      const double d = config.similarity == SimilarityKind::hausdorff ? hausdorff(obs, gen) : discrete_frechet(obs, gen);
      loss[c] = d * d;  // squared metres, same units as the windowed MSE
    }
  });
  return loss;
}

PosteriorEstimate finish(const InferenceGrid& grid, std::vector<double> weights) {
  PosteriorEstimate p;
  p.nx = grid.nx;
  p.ny = grid.ny;
  p.origin = grid.origin;
  p.cell_size = grid.cell_size;
  double total = 0.0;
  for (double w : weights) total += w;
  double sq = 0.0;
  for (double& w : weights) {
    w /= total;
    sq += w * w;
  }
  p.n_effective = 1.0 / sq;
  p.map_cell = static_cast<std::size_t>(std::max_element(weights.begin(), weights.end()) - weights.begin());
  p.map_point = grid.target(p.map_cell);
  p.weights = std::move(weights);
  return p;
}

}  // namespace

PosteriorEstimate grid_posterior(const InferenceGrid& grid, std::span<const double> prior_density,
                                 const TrajectoryGenerator& generator, const InferenceConfig& config,
                                 const Trajectory& observed, std::size_t t_index, Diagnostics* diagnostics) {
  config.validate();
  grid.validate();
  if (prior_density.size() != grid.cells()) throw Error(ErrorCode::shape_mismatch, "prior does not match the grid");

  std::shared_ptr<const std::vector<float>> trajectories = grid.cache;
  int points = grid.cache_points;
  double dt = grid.cache_dt;
  if (trajectories) {
    if (grid.generation_tag != generator.tag()) {
      throw Error(ErrorCode::stale_cache,
                  "grid cache built by '" + grid.generation_tag + "' but generator is '" + generator.tag() + "'");
    }
  } else {
    trajectories = build_cache(grid, generator).cache;
    points = generator.points();
    dt = generator.dt();
  }

  bool partial = false;
  const std::vector<double> loss = cell_losses(grid, *trajectories, points, dt, config, observed, t_index, partial);

  const std::size_t n = grid.cells();
  std::vector<double> weights(n, 0.0);
  if (config.kernel == Kernel::indicator) {
    for (std::size_t c = 0; c < n; ++c) weights[c] = loss[c] < config.epsilon ? prior_density[c] : 0.0;
  } else {
    // Work in log space relative to the best cell so a sharp kernel cannot
    // underflow every weight.
    const double scale = 1.0 / (2.0 * config.bandwidth * config.bandwidth);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < n; ++c) {
      if (prior_density[c] > 0.0) best = std::min(best, loss[c]);
    }
    for (std::size_t c = 0; c < n; ++c) {
      weights[c] = prior_density[c] > 0.0 ? prior_density[c] * std::exp(-(loss[c] - best) * scale) : 0.0;
    }
  }

  double total = 0.0;
  for (double w : weights) total += w;
  bool degenerate = false;
  if (!(total > 0.0) || !std::isfinite(total)) {
    report(diagnostics, "degenerate evidence: no cell accepted, returning the prior");
    degenerate = true;
    weights.assign(prior_density.begin(), prior_density.end());
    total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) weights.assign(n, 1.0);
  }
  if (partial) report(diagnostics, "partial window: fewer than w observations");
  PosteriorEstimate p = finish(grid, std::move(weights));
  p.degenerate = degenerate;
  p.partial_window = partial;
  return p;
}

PosteriorEstimate prior_estimate(const InferenceGrid& grid, std::span<const double> prior_density) {
  if (prior_density.size() != grid.cells()) throw Error(ErrorCode::shape_mismatch, "prior does not match the grid");
  std::vector<double> weights(prior_density.begin(), prior_density.end());
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) weights.assign(grid.cells(), 1.0);
  return finish(grid, std::move(weights));
}

PosteriorEstimate grid_posterior(const InferenceGrid& grid, const PriorSpec& prior,
                                 const TrajectoryGenerator& generator, const InferenceConfig& config,
                                 const Trajectory& observed, std::size_t t_index, Diagnostics* diagnostics) {
  const std::vector<double> density = prior_on_grid(grid, prior);
  return grid_posterior(grid, density, generator, config, observed, t_index, diagnostics);
}

std::vector<ObjectProbability> decision_summary(const PosteriorEstimate& posterior, const InferenceGrid& grid,
                                                const Scene& scene, double conflict_radius) {
  if (scene.objects.empty()) throw Error(ErrorCode::empty_scene, "decision summary needs objects");
  if (posterior.weights.size() != grid.cells()) throw Error(ErrorCode::shape_mismatch, "posterior does not match grid");
  const double r2 = conflict_radius * conflict_radius;
  std::vector<ObjectProbability> out;
  out.reserve(scene.objects.size());
  for (const SceneObject& o : scene.objects) {
    const Vec2 c = scene.table.to_plane(o.position);
    const int x0 = std::max(0, static_cast<int>(std::floor((c.x() - conflict_radius - grid.origin.x()) / grid.cell_size)));
    const int x1 = std::min(grid.nx - 1, static_cast<int>(std::floor((c.x() + conflict_radius - grid.origin.x()) / grid.cell_size)));
    const int y0 = std::max(0, static_cast<int>(std::floor((c.y() - conflict_radius - grid.origin.y()) / grid.cell_size)));
    const int y1 = std::min(grid.ny - 1, static_cast<int>(std::floor((c.y() + conflict_radius - grid.origin.y()) / grid.cell_size)));
    double mass = 0.0;
    for (int iy = y0; iy <= y1; ++iy) {
      for (int ix = x0; ix <= x1; ++ix) {
        const std::size_t cell = static_cast<std::size_t>(iy) * static_cast<std::size_t>(grid.nx) + static_cast<std::size_t>(ix);
        if ((grid.center(cell) - c).squaredNorm() <= r2) mass += posterior.weights[cell];
      }
    }
    out.push_back({o.id, std::clamp(mass, 0.0, 1.0)});
  }
  return out;
}

nlohmann::json posterior_to_json(const PosteriorEstimate& p) {
  return {{"nx", p.nx},
          {"ny", p.ny},
          {"origin", {p.origin.x(), p.origin.y()}},
          {"cell_size", p.cell_size},
          {"layout", "row-major, index = iy * nx + ix"},
          {"map_cell", p.map_cell},
          {"map_point", {p.map_point.x(), p.map_point.y(), p.map_point.z()}},
          {"n_effective", p.n_effective},
          {"degenerate", p.degenerate},
          {"weights", p.weights}};
}

namespace {
constexpr std::uint32_t kPosteriorVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {char(v & 0xFF), char((v >> 8) & 0xFF), char((v >> 16) & 0xFF), char((v >> 24) & 0xFF)};
  os.write(b, 4);
}
std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}
}  // namespace

void write_ipos(const std::filesystem::path& path, const PosteriorEstimate& p) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorCode::io, "cannot open " + path.string() + " for writing");
  os.write("IPOS", 4);
  put_u32(os, kPosteriorVersion);
  put_u32(os, static_cast<std::uint32_t>(p.nx));
  put_u32(os, static_cast<std::uint32_t>(p.ny));
  std::vector<float> w(p.weights.begin(), p.weights.end());
  const auto bytes = codec::pack_f32(w);
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw Error(ErrorCode::io, "failed writing " + path.string());
}

PosteriorEstimate read_ipos(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "IPOS", 4) != 0) {
    throw Error(ErrorCode::bad_magic, path.string() + " is not an IPOS posterior");
  }
  if (bytes.size() < 16) throw Error(ErrorCode::truncated, "IPOS header truncated");
  PosteriorEstimate p;
  p.nx = static_cast<int>(get_u32(bytes.data() + 8));
  p.ny = static_cast<int>(get_u32(bytes.data() + 12));
  const std::size_t n = static_cast<std::size_t>(p.nx) * static_cast<std::size_t>(p.ny);
  if (bytes.size() < 16 + 4 * n) throw Error(ErrorCode::truncated, "IPOS weights truncated");
  const auto w = codec::unpack_f32(std::span<const std::uint8_t>(bytes).subspan(16, 4 * n));
  p.weights.assign(w.begin(), w.end());
  p.map_cell = static_cast<std::size_t>(std::max_element(p.weights.begin(), p.weights.end()) - p.weights.begin());
  return p;
}

}  // namespace reachabc
