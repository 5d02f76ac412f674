// End-to-end acceptance run: one PASS/FAIL line per criterion, details on
// the following indented lines. Exit status is non-zero if any line fails.

#include "reachabc/abc.hpp"
#include "reachabc/bench.hpp"
#include "reachabc/task.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <string>

using namespace reachabc;

namespace {

using Clock = std::chrono::steady_clock;

int failures = 0;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void verdict(int id, bool ok, const std::string& what) {
  std::printf("[%s] %d %s\n", ok ? "PASS" : "FAIL", id, what.c_str());
  std::fflush(stdout);
  failures += ok ? 0 : 1;
}

template <class... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double ks_p_value(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
  }
  const double n = double(a.size()) * b.size() / (a.size() + b.size());
  const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) p += 2.0 * (k % 2 ? 1 : -1) * std::exp(-2.0 * k * k * lambda * lambda);
  return std::clamp(p, 0.0, 1.0);
}

struct Shared {
  ArmModel model = ArmModel::standard();
  ControllerGains gains;
  Scene scene = default_scene();
  std::shared_ptr<const SurrogateNet> net;
  std::unique_ptr<SimulatorGenerator> simulator;
  std::unique_ptr<SurrogateGenerator> surrogate;
  InferenceGrid grid;  // full grid, surrogate cache
};

void surrogate_fidelity(Shared& s) {
  const auto t0 = Clock::now();
  DatasetRecipe recipe;
  recipe.count = 10000;
  recipe.seed = 0;
  const TrajectoryDataset data = generate_dataset(s.model, s.gains, s.scene, recipe);
  const double gen_s = seconds_since(t0);
  TrainConfig config;
  config.seed = 0;
  const TrainResult r = train(data, config);
  const double total_s = seconds_since(t0);
  s.net = std::make_shared<const SurrogateNet>(r.net);
  const double err = r.report.test_mean_point_error;
  verdict(1, err <= 0.02 && total_s <= 1800.0,
          fmt("surrogate fidelity: held-out mean point error %.4f m (<= 0.02) on %zu/%zu split; "
              "dataset %.1f s + training %.1f s = %.1f s (<= 1800 s)",
              err, r.report.train_count, r.report.test_count, gen_s, total_s - gen_s, total_s));
}

void interactive_rate(Shared& s) {
  const InferenceConfig config;
  const BenchInput input = bench_input(*s.simulator, 1);
  const InferenceGrid bare = InferenceGrid::for_table(s.scene.table);
  const LatencyStats cold = cold_inference(bare, *s.surrogate, config, input, 20);
  const LatencyStats warm = warm_inference(s.grid, *s.surrogate, config, input, 1000);
  verdict(2, cold.max_ms <= 50.0 && warm.p99_ms <= 10.0,
          fmt("interactive rate: cold %zu-cell inference max %.2f ms / median %.2f ms over %zu runs (<= 50 ms); "
              "warm p99 %.2f ms over %zu steps (<= 10 ms)",
              bare.cells(), cold.max_ms, cold.p50_ms, cold.count, warm.p99_ms, warm.count));
}

void speedup(Shared& s) {
  const auto targets = s.grid.targets();
  const GenerationTiming g = generation_speedup(*s.simulator, *s.surrogate, targets, targets.size());
  verdict(3, g.speedup >= 1000.0,
          fmt("surrogate speedup: %.0fx (>= 1000x); simulator %.1f ms for %zu trajectories single-threaded "
              "(%.3f ms each), surrogate batch %.2f ms",
              g.speedup, g.simulator_total_ms, g.simulator_measured, g.simulator_ms_per_trajectory,
              g.surrogate_total_ms));
}

void abc_exactness() {
  // 1-D toy: z ~ N(0,1), x = z + N(0, 0.1^2), observed 0.5, |x - obs| < 0.05.
  const double obs = 0.5, eps = 0.05, sigma = 0.1;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> prior(0.0, 1.0), noise(0.0, sigma);
  AbcConfig config;
  config.epsilon = eps;
  config.n_samples = 10000;
  config.max_draws = 10'000'000;
  const auto result = abc_reject([&](auto& r) { return prior(r); }, [&](double z) { return z + noise(rng); },
                                 [](double o, double x) { return std::abs(o - x); }, obs, config, rng);
  auto density = [&](double z) {
    return std::exp(-0.5 * z * z) * (normal_cdf((obs + eps - z) / sigma) - normal_cdf((obs - eps - z) / sigma));
  };
  const double lo = -0.5, hi = 1.5;
  const int bins = 40;
  const double width = (hi - lo) / bins;
  std::vector<double> expected(bins, 0.0), observed(bins, 0.0);
  double total = 0.0;
  for (int b = 0; b < bins; ++b) {
    const int m = 20;
    const double h = width / m;
    double acc = 0.0;
    for (int k = 0; k <= m; ++k) acc += (k == 0 || k == m ? 1 : (k % 2 ? 4 : 2)) * density(lo + b * width + k * h);
    expected[b] = acc * h / 3.0;
    total += expected[b];
  }
  for (double& e : expected) e /= total;
  double outside = 0.0;
  for (double z : result.samples) {
    const int b = static_cast<int>(std::floor((z - lo) / width));
    if (b >= 0 && b < bins) {
      observed[b] += 1.0 / result.samples.size();
    } else {
      outside += 1.0 / result.samples.size();
    }
  }
  double tv = outside;
  for (int b = 0; b < bins; ++b) tv += std::abs(observed[b] - expected[b]);
  tv *= 0.5;

  AbcConfig wide;
  wide.epsilon = std::numeric_limits<double>::infinity();
  wide.n_samples = 10000;
  std::mt19937_64 rng2(11);
  const auto open = abc_reject([&](auto& r) { return prior(r); }, [&](double z) { return z + noise(rng2); },
                               [](double o, double x) { return std::abs(o - x); }, obs, wide, rng2);
  std::mt19937_64 other(12);
  std::vector<double> direct(10000);
  for (double& z : direct) z = prior(other);
  const double p = ks_p_value(open.samples, direct);
  verdict(4, tv <= 0.05 && p > 0.01 && !result.starved,
          fmt("ABC exactness: TV to quadrature posterior %.4f at n=%zu (<= 0.05, %zu draws); "
              "infinite-epsilon KS p=%.3f against the prior (> 0.01)",
              tv, result.samples.size(), result.draws, p));
}

void prediction_quality(Shared& s) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> noise(0.0, 0.005);
  const InferenceConfig config;
  const double fractions[3] = {0.25, 0.50, 0.75};
  int hits[3] = {0, 0, 0};
  int monotone = 0, comparisons = 0;
  const int trials = 200;
  for (int trial = 0; trial < trials; ++trial) {
    const Scene scene = random_scene(1000 + static_cast<std::uint64_t>(trial));
    const SceneObject& obj = scene.objects[rng() % scene.objects.size()];
    Trajectory obs = generate(s.model, s.gains, scene, start_posture(s.model), obj.position);
    for (auto& p : obs.points) p += Vec3(noise(rng), noise(rng), noise(rng));
    const std::size_t truth = *s.grid.cell_of(scene.table.to_plane(obj.position));
    const std::vector<double> density = prior_on_grid(s.grid, objects_prior(scene));
    bool ok[3];
    for (int f = 0; f < 3; ++f) {
      const auto t_index = static_cast<std::size_t>(std::lround(fractions[f] * obs.size())) - 1;
      const PosteriorEstimate post = grid_posterior(s.grid, density, *s.surrogate, config, obs, t_index);
      ok[f] = s.grid.chebyshev(post.map_cell, truth) <= 1;
      hits[f] += ok[f];
    }
    monotone += (ok[1] >= ok[0]) + (ok[2] >= ok[1]);
    comparisons += 2;
  }
  const double acc50 = double(hits[1]) / trials;
  const double mono = double(monotone) / comparisons;
  verdict(5, acc50 >= 0.90 && mono >= 0.95,
          fmt("prediction quality: MAP within 1 cell in %d/%d trials at 50%% (>= 90%%); at 25%%/75%%: %d/%d; "
              "monotone in %d/%d adjacent comparisons (>= 95%%)",
              hits[1], trials, hits[0], hits[2], monotone, comparisons));
}

void fluency_ordering(Shared& s) {
  Engines engines;
  engines.human_motion = s.simulator.get();
  engines.inference = s.surrogate.get();
  engines.grid = &s.grid;
  const Policy policies[4] = {Policy::solo_human, Policy::solo_robot, Policy::turn_taking, Policy::intent_prediction};
  double T[4] = {}, FD[4] = {}, RI[4] = {}, HI[4] = {};
  int violations = 0;
  for (int p = 0; p < 4; ++p) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const Scene scene = random_scene(seed);
      const TaskLog log = run_policy(policies[p], scene, engines, TaskConfig{}, seed);
      const FluencyMetrics m = compute_metrics(log);
      violations += safety_violations(log, scene, TaskConfig{}.conflict_radius);
      T[p] += m.T / 10.0;
      FD[p] += m.FD.value_or(0.0) / 10.0;
      RI[p] += m.RI.value_or(0.0) / 10.0;
      HI[p] += m.HI.value_or(0.0) / 10.0;
    }
  }
  enum { SH, SR, TT, IP };
  const bool ok = T[IP] < T[TT] && T[TT] < T[SH] && T[SH] < T[SR] && FD[IP] < FD[TT] && FD[TT] < 0.0 &&
                  RI[IP] < RI[TT] && HI[IP] < HI[TT];
  verdict(6, ok,
          fmt("fluency ordering over 10 seeds: T %.2f < %.2f < %.2f < %.2f; FD %.2f < %.2f < 0; RI %.2f < %.2f; "
              "HI %.2f < %.2f (intent, turn-taking, solo human, solo robot); %d safety violations",
              T[IP], T[TT], T[SH], T[SR], FD[IP], FD[TT], RI[IP], RI[TT], HI[IP], HI[TT], violations));
}

void numerical_suites(Shared& s) {
  std::mt19937_64 rng(42);
  // Jacobian against central differences.
  double jac = 0.0;
  const double h = 1e-6;
  for (int trial = 0; trial < 1000; ++trial) {
    JointVector theta;
    for (int i = 0; i < kNumJoints; ++i) {
      std::uniform_real_distribution<double> u(0.95 * s.model.joint_limits[i].lower, 0.95 * s.model.joint_limits[i].upper);
      theta[i] = u(rng);
    }
    const JacobianMatrix J = jacobian(s.model, theta);
    for (int i = 0; i < kNumJoints; ++i) {
      JointVector plus = theta, minus = theta;
      plus[i] += h;
      minus[i] -= h;
      const Vec3 central = (forward_kinematics(s.model, plus) - forward_kinematics(s.model, minus)) / 2.0;
      jac = std::max(jac, (J.col(i) * h - central).norm());
    }
  }
  double null = 0.0;
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    JointVector theta;
    for (int i = 0; i < kNumJoints; ++i) {
      std::uniform_real_distribution<double> u(0.95 * s.model.joint_limits[i].lower, 0.95 * s.model.joint_limits[i].upper);
      theta[i] = u(rng);
    }
    const JacobianMatrix J = jacobian(s.model, theta);
    const NullspaceMatrix N = nullspace_projector(pseudo_inverse(J, 0.0), J);
    JointVector v;
    for (int i = 0; i < kNumJoints; ++i) v[i] = n(rng);
    null = std::max({null, (J * N * v).norm(), (N * N - N).norm()});
  }

  // Network gradient against central differences.
  Mlp<double> net({3, 4, 4, 6});
  net.initialise(rng);
  for (auto& l : net.layers()) {
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = 0.3 * n(rng);
  }
  Mlp<double>::Matrix x(7, 3), y(7, 6);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = n(rng);
  std::vector<Mlp<double>::Layer> grad;
  net.loss_and_gradient(x, y, grad);
  double rel = 0.0;
  auto check = [&](double& param, double analytic) {
    const double saved = param;
    param = saved + 1e-5;
    const double up = net.loss(x, y);
    param = saved - 1e-5;
    const double down = net.loss(x, y);
    param = saved;
    const double numeric = (up - down) / 2e-5;
    rel = std::max(rel, std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-6}));
  };
  for (std::size_t l = 0; l < net.depth(); ++l) {
    auto& layer = net.layers()[l];
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) check(layer.weight.data()[i], grad[l].weight.data()[i]);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) check(layer.bias.data()[i], grad[l].bias.data()[i]);
  }

  // Prior mass over the workspace grid.
  const double area = s.grid.cell_size * s.grid.cell_size;
  double mass = 1.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    double m = 0.0;
    for (double d : prior_on_grid(s.grid, objects_prior(random_scene(seed)))) m += d * area;
    mass = std::min(mass, m);
  }

  // Cached posterior equals uncached, bit for bit.
  const BenchInput input = bench_input(*s.simulator, 3);
  const InferenceConfig config;
  InferenceGrid bare = s.grid;
  bare.cache.reset();
  bare.generation_tag.clear();
  const auto cached = grid_posterior(s.grid, input.prior, *s.surrogate, config, input.observed, 40);
  const auto uncached = grid_posterior(bare, input.prior, *s.surrogate, config, input.observed, 40);
  const bool bit_equal = cached.weights == uncached.weights;

  // Seeded end-to-end determinism: task logs and posteriors.
  Engines engines;
  engines.human_motion = s.simulator.get();
  engines.inference = s.surrogate.get();
  engines.grid = &s.grid;
  std::ostringstream a, b;
  write_jsonl(a, run_policy(Policy::intent_prediction, random_scene(4), engines, TaskConfig{}, 4));
  write_jsonl(b, run_policy(Policy::intent_prediction, random_scene(4), engines, TaskConfig{}, 4));
  const auto again = grid_posterior(s.grid, input.prior, *s.surrogate, config, input.observed, 40);
  const bool deterministic = a.str() == b.str() && again.weights == cached.weights;

  verdict(7, jac <= 1e-5 && null <= 1e-8 && rel <= 1e-4 && mass >= 0.99 && bit_equal && deterministic,
          fmt("numerical suites: Jacobian FD error %.2e (<= 1e-5); nullspace residual %.2e (<= 1e-8); "
              "gradient check rel. error %.2e (<= 1e-4); min prior grid mass %.4f (>= 0.99); cache bit-equal %s; "
              "seeded determinism %s",
              jac, null, rel, mass, bit_equal ? "yes" : "no", deterministic ? "yes" : "no"));
}

void controller_convergence(Shared& s) {
  const auto targets = sample_workspace_targets(s.scene, 500, 2024);
  int reached = 0;
  double worst = 0.0;
  for (const Vec3& t : targets) {
    const Trajectory tr = generate(s.model, s.gains, s.scene, start_posture(s.model), t);
    const double d = (tr.points.back() - t).norm();
    worst = std::max(worst, d);
    reached += d <= 0.02;
  }
  verdict(8, reached >= 495,
          fmt("controller convergence: %d/500 targets within 2 cm after %d steps (>= 99%%); worst %.4f m",
              reached, s.gains.horizon, worst));
}

}  // namespace

int main() {
  Shared s;
  s.simulator = std::make_unique<SimulatorGenerator>(s.model, s.gains, s.scene);
  surrogate_fidelity(s);
  s.surrogate = std::make_unique<SurrogateGenerator>(s.net);
  s.grid = build_cache(InferenceGrid::for_table(s.scene.table), *s.surrogate);
  interactive_rate(s);
  speedup(s);
  abc_exactness();
  prediction_quality(s);
  fluency_ordering(s);
  numerical_suites(s);
  controller_convergence(s);
  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
