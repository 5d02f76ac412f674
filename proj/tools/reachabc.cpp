// Command-line front end: dataset generation, training, benchmarks, task
// simulation, offline inference and the live inference service.

#include "reachabc/bench.hpp"
#include "reachabc/service.hpp"
#include "reachabc/task.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <thread>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace reachabc;

namespace {

enum Exit { kOk = 0, kUsage = 2, kData = 3, kRuntime = 4 };

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::parameter: return kUsage;
    case ErrorCode::domain:
    case ErrorCode::insufficient_data:
    case ErrorCode::empty_scene:
    case ErrorCode::alignment:
    case ErrorCode::stale_cache:
    case ErrorCode::corrupt_model:
    case ErrorCode::bad_magic:
    case ErrorCode::shape_mismatch:
    case ErrorCode::truncated:
    case ErrorCode::io: return kData;
    default: return kRuntime;
  }
}

// Flat JSON config: {"seed": 3, "epochs": 200, ...}. Each key is offered to
// the main app and to every subcommand; CLI11 only fills options the command
// line left empty, so flags win over the file and the file over defaults.
class JsonConfig : public CLI::Config {
 public:
  explicit JsonConfig(const CLI::App* app) : app_(app) {}

  std::string to_config(const CLI::App* app, bool, bool, std::string) const override {
    json j = json::object();
    for (const CLI::Option* opt : app->get_options()) {
      if (!opt->get_lnames().empty() && opt->count() > 0) j[opt->get_lnames().front()] = opt->as<std::string>();
    }
    return j.dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    try {
      j = json::parse(input);
    } catch (const json::parse_error& e) {
      throw CLI::ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConfigError("config must be a flat JSON object");
    const std::set<std::string> known = option_names();
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : j.items()) {
      if (!known.count(key)) throw CLI::ConfigError("unknown config key '" + key + "'");
      if (value.is_object()) throw CLI::ConfigError("config key '" + key + "' must not be nested");
      std::vector<std::string> inputs;
      if (value.is_array()) {
        for (const auto& v : value) inputs.push_back(v.is_string() ? v.get<std::string>() : v.dump());
      } else {
        inputs.push_back(value.is_string() ? value.get<std::string>() : value.dump());
      }
      CLI::ConfigItem root;
      root.name = key;
      root.inputs = inputs;
      items.push_back(root);
      for (const CLI::App* sub : app_->get_subcommands({})) {
        CLI::ConfigItem item = root;
        item.parents = {sub->get_name()};
        items.push_back(item);
      }
    }
    return items;
  }

 private:
  std::set<std::string> option_names() const {
    std::set<std::string> names;
    auto add = [&](const CLI::App* a) {
      for (const CLI::Option* opt : a->get_options()) {
        for (const auto& n : opt->get_lnames()) names.insert(n);
      }
    };
    add(app_);
    for (const CLI::App* sub : app_->get_subcommands({})) add(sub);
    return names;
  }

  const CLI::App* app_;
};

Scene load_scene(const std::string& path) {
  if (path.empty()) return default_scene();
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::io, "cannot open scene " + path);
  Scene scene;
  try {
    from_json(json::parse(is), scene);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::io, "scene " + path + " is not valid JSON: " + e.what());
  }
  scene.validate();
  return scene;
}

std::shared_ptr<const SurrogateNet> load_surrogate(const std::string& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::io, "weights file " + path + " does not exist");
  return std::make_shared<const SurrogateNet>(load_weights(path));
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::io, "cannot write " + path.string());
  os << j.dump(2) << '\n';
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- gen-dataset ----------------------------------------------------------

struct GenArgs {
  std::size_t count = 10000;
  std::string out;
  std::uint64_t seed = 0;
  std::string scene;
};

int gen_dataset(const GenArgs& a) {
  const Scene scene = load_scene(a.scene);
  const ArmModel model = ArmModel::standard();
  const ControllerGains gains;
  DatasetRecipe recipe{a.count, a.seed};
  const auto t0 = std::chrono::steady_clock::now();
  const TrajectoryDataset data = generate_dataset(model, gains, scene, recipe);
  const double secs = seconds_since(t0);
  write_itrj(a.out, data);
  write_json(a.out + ".meta.json", dataset_metadata(model, gains, scene, recipe));
  std::cout << json{{"records", data.count()},
                    {"out", a.out},
                    {"seconds", secs},
                    {"trajectories_per_second", static_cast<double>(data.count()) / secs}}
                   .dump()
            << '\n';
  return kOk;
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  std::string dataset;
  std::string out;
  TrainConfig config;
  std::string optimizer = "adam";
};

int train_cmd(TrainArgs a) {
  if (!fs::exists(a.dataset)) throw Error(ErrorCode::io, "dataset " + a.dataset + " does not exist");
  const TrajectoryDataset data = read_itrj(a.dataset);
  a.config.optimizer = a.optimizer == "sgd" ? Optimizer::sgd_momentum : Optimizer::adam;
  a.config.on_epoch = [](int epoch, double loss) {
    if (epoch % 50 == 0) std::cerr << "epoch " << epoch << " loss " << loss << '\n';
  };
  const TrainResult r = train(data, a.config);
  save_weights(r.net, a.out);
  const TrainReport& p = r.report;
  std::cout << json{{"epochs", p.epochs},
                    {"train_count", p.train_count},
                    {"test_count", p.test_count},
                    {"train_loss", p.train_loss},
                    {"test_loss", p.test_loss},
                    {"test_mean_point_error_m", p.test_mean_point_error},
                    {"seconds", p.seconds},
                    {"sha256", r.net.weights_hash()},
                    {"out", a.out}}
                   .dump()
            << '\n';
  return kOk;
}

// ---- bench ----------------------------------------------------------------

struct BenchArgs {
  std::string surrogate;
  double cell = 0.01;
  int repeats = 1000;
  int cold_repeats = 20;
  std::size_t sim_samples = 9100;
  std::uint64_t seed = 0;
  int threads = 1;
};

int bench(const BenchArgs& a) {
  const auto net = load_surrogate(a.surrogate);
  const SurrogateGenerator surrogate(net);
  const SimulatorGenerator simulator(ArmModel::standard(), ControllerGains{}, default_scene());
  InferenceConfig config;
  config.threads = a.threads;
  const InferenceGrid grid = InferenceGrid::for_table(default_scene().table, a.cell);
  const BenchInput input = bench_input(simulator, a.seed);

  const LatencyStats cold = cold_inference(grid, surrogate, config, input, a.cold_repeats);
  const InferenceGrid cached = build_cache(grid, surrogate);
  const LatencyStats warm = warm_inference(cached, surrogate, config, input, a.repeats);
  const GenerationTiming gen = generation_speedup(simulator, surrogate, grid.targets(), a.sim_samples);
  std::cout << json{{"cells", grid.cells()},
                    {"cold", to_json(cold)},
                    {"warm", to_json(warm)},
                    {"generation", to_json(gen)}}
                   .dump(2)
            << '\n';
  return kOk;
}

// ---- simulate -------------------------------------------------------------

struct SimulateArgs {
  std::string policy = "all";
  int seeds = 10;
  std::uint64_t seed_base = 0;
  std::string out;
  std::string surrogate;
  double cell = 0.01;
  std::string scene;
};

int simulate(const SimulateArgs& a) {
  std::vector<Policy> policies;
  if (a.policy == "all") {
    policies = {Policy::solo_human, Policy::solo_robot, Policy::turn_taking, Policy::intent_prediction};
  } else {
    policies = {parse_policy(a.policy)};
  }
  const SimulatorGenerator human(ArmModel::standard(), ControllerGains{}, default_scene());
  std::shared_ptr<const TrajectoryGenerator> inference;
  if (!a.surrogate.empty()) {
    inference = std::make_shared<SurrogateGenerator>(load_surrogate(a.surrogate));
  } else {
    inference = std::make_shared<SimulatorGenerator>(ArmModel::standard(), ControllerGains{}, default_scene());
  }
  InferenceGrid grid;
  const bool needs_grid = std::find(policies.begin(), policies.end(), Policy::intent_prediction) != policies.end();
  if (needs_grid) grid = build_cache(InferenceGrid::for_table(default_scene().table, a.cell), *inference);

  Engines engines;
  engines.human_motion = &human;
  engines.inference = inference.get();
  engines.grid = needs_grid ? &grid : nullptr;

  fs::create_directories(a.out);
  json summary = json::array();
  for (Policy policy : policies) {
    const std::string name = to_string(policy);
    const fs::path dir = fs::path(a.out) / name;
    fs::create_directories(dir);
    std::vector<std::uint64_t> seeds;
    std::vector<FluencyMetrics> runs;
    for (int k = 0; k < a.seeds; ++k) {
      const std::uint64_t seed = a.seed_base + static_cast<std::uint64_t>(k);
      const Scene scene = a.scene.empty() ? random_scene(seed) : load_scene(a.scene);
      Diagnostics diag;
      const TaskLog log = run_policy(policy, scene, engines, TaskConfig{}, seed, &diag);
      const FluencyMetrics m = compute_metrics(log);
      const std::string stem = "seed_" + std::to_string(seed);
      {
        std::ofstream os(dir / (stem + ".jsonl"));
        write_jsonl(os, log);
      }
      {
        std::ofstream os(dir / (stem + ".svg"));
        os << export_task_diagram(log);
      }
      const std::vector<FluencyMetrics> one{m};
      const std::vector<std::uint64_t> one_seed{seed};
      json run = metrics_summary(name, one_seed, one)["mean"];
      run["seed"] = seed;
      run["safety_violations"] = safety_violations(log, scene, TaskConfig{}.conflict_radius);
      run["diagnostics"] = diag.messages;
      write_json(dir / (stem + ".metrics.json"), run);
      seeds.push_back(seed);
      runs.push_back(m);
    }
    summary.push_back(metrics_summary(name, seeds, runs));
  }
  write_json(fs::path(a.out) / "summary.json", summary);
  std::cout << summary.dump(2) << '\n';
  return kOk;
}

// ---- infer-file -----------------------------------------------------------

struct InferArgs {
  std::string surrogate;
  std::string scene;
  std::string trajectory;
  std::size_t record = 0;
  double fraction = 0.6;
  std::string prior = "combined";
  std::string emit;
  std::string kernel = "gaussian";
  std::string similarity = "windowed_mse";
  double bandwidth = 0.05;
  double epsilon = 0.02;
  int threads = 1;
};

struct LoadedTrajectory {
  Trajectory points;
  std::optional<Vec3> target;
};

LoadedTrajectory load_trajectory(const std::string& path, std::size_t record) {
  if (!fs::exists(path)) throw Error(ErrorCode::io, "trajectory file " + path + " does not exist");
  const std::string ext = fs::path(path).extension().string();
  if (ext == ".itrj" || ext == ".jsonl") {
    const TrajectoryDataset data = ext == ".itrj" ? read_itrj(path) : read_jsonl(path);
    if (record >= data.count()) {
      throw Error(ErrorCode::parameter, "record " + std::to_string(record) + " outside dataset of " +
                                            std::to_string(data.count()));
    }
    return {data.trajectory(record), data.target(record)};
  }
  std::ifstream is(path);
  LoadedTrajectory out;
  try {
    const json j = json::parse(is);
    out.points.dt = j.value("dt", kSampleDt);
    for (const auto& p : j.at("points")) out.points.points.emplace_back(p.at(0), p.at(1), p.at(2));
    if (j.contains("target")) out.target = Vec3(j["target"][0], j["target"][1], j["target"][2]);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::io, "trajectory " + path + " is malformed: " + e.what());
  }
  return out;
}

int infer_file(const InferArgs& a) {
  if (!(a.fraction > 0.0 && a.fraction <= 1.0)) throw Error(ErrorCode::parameter, "fraction must be in (0, 1]");
  const Scene scene = load_scene(a.scene);
  const SurrogateGenerator generator(load_surrogate(a.surrogate));
  const LoadedTrajectory traj = load_trajectory(a.trajectory, a.record);
  const InferenceGrid grid = build_cache(InferenceGrid::for_table(scene.table), generator);

  InferenceConfig config;
  config.kernel = a.kernel == "indicator" ? Kernel::indicator : Kernel::gaussian;
  config.bandwidth = a.bandwidth;
  config.epsilon = a.epsilon;
  config.threads = a.threads;
  if (a.similarity == "hausdorff") {
    config.similarity = SimilarityKind::hausdorff;
  } else if (a.similarity == "frechet") {
    config.similarity = SimilarityKind::frechet;
  }

  const std::size_t n = std::min<std::size_t>(traj.points.size(), static_cast<std::size_t>(generator.points()));
  if (n == 0) throw Error(ErrorCode::insufficient_data, "trajectory is empty");
  const auto t_index = static_cast<std::size_t>(std::max(0.0, std::round(a.fraction * static_cast<double>(n)) - 1.0));
  const Vec2 origin = scene.table.to_plane(traj.points[0]);
  std::vector<double> density;
  if (a.prior == "flat") {
    density.assign(grid.cells(), 1.0);
  } else if (a.prior == "objects") {
    density = prior_on_grid(grid, objects_prior(scene));
  } else if (a.prior == "proximity") {
    density = prior_on_grid(grid, proximity_prior(origin));
  } else {
    density = prior_on_grid(grid, combined_prior(scene, origin, nullptr, 0.0));
  }
  Diagnostics diag;
  const PosteriorEstimate p = grid_posterior(grid, density, generator, config, traj.points, t_index, &diag);
  if (!a.emit.empty()) write_ipos(a.emit, p);

  json out = {{"t_index", t_index},
              {"map_cell", p.map_cell},
              {"map_point", {p.map_point.x(), p.map_point.y(), p.map_point.z()}},
              {"n_effective", p.n_effective},
              {"entropy", p.entropy()},
              {"degenerate", p.degenerate},
              {"diagnostics", diag.messages}};
  if (traj.target) {
    const auto cell = grid.cell_of(scene.table.to_plane(*traj.target));
    out["target"] = {traj.target->x(), traj.target->y(), traj.target->z()};
    if (cell) out["map_chebyshev_cells"] = grid.chebyshev(p.map_cell, *cell);
  }
  if (!scene.objects.empty()) {
    json probs = json::object();
    for (const auto& op : decision_summary(p, grid, scene, TaskConfig{}.conflict_radius)) {
      probs[std::to_string(op.id)] = op.probability;
    }
    out["object_probs"] = probs;
  }
  std::cout << out.dump(2) << '\n';
  return kOk;
}

// ---- serve ----------------------------------------------------------------

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

struct ServeArgs {
  int port = 8765;
  std::string host = "127.0.0.1";
  std::string surrogate;
  std::string scene;
  int threads = 1;
};

int serve(const ServeArgs& a) {
  auto ctx = std::make_shared<ServiceContext>();
  ctx->generator = std::make_shared<SurrogateGenerator>(load_surrogate(a.surrogate));
  ctx->scene = load_scene(a.scene);
  ctx->grid = build_cache(InferenceGrid::for_table(ctx->scene.table), *ctx->generator);
  ctx->inference.threads = a.threads;
  Server server(ctx, a.port, a.host);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "listening on " << a.host << ':' << server.port() << '\n';
  std::jthread loop([&](std::stop_token st) { server.run(st); });
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  loop.request_stop();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reach-target inference with a neural trajectory surrogate"};
  app.require_subcommand(1);
  app.allow_config_extras(CLI::config_extras_mode::ignore);
  app.set_config("--config", "", "Flat JSON config; command-line flags take precedence");
  app.config_formatter(std::make_shared<JsonConfig>(&app));

  GenArgs gen;
  auto* g = app.add_subcommand("gen-dataset", "Simulate reaches to uniform workspace targets into an ITRJ file");
  g->add_option("--count", gen.count, "Number of trajectories")->capture_default_str()->check(CLI::PositiveNumber);
  g->add_option("--out", gen.out, "Output .itrj path")->required();
  g->add_option("--seed", gen.seed, "Target sampling seed")->capture_default_str();
  g->add_option("--scene", gen.scene, "Scene JSON (default scene when omitted)");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Fit the surrogate network to an ITRJ dataset");
  t->add_option("--dataset", tr.dataset, "Input .itrj")->required();
  t->add_option("--out", tr.out, "Output weights JSON")->required();
  t->add_option("--epochs", tr.config.epochs)->capture_default_str()->check(CLI::PositiveNumber);
  t->add_option("--seed", tr.config.seed)->capture_default_str();
  t->add_option("--batch-size", tr.config.batch_size)->capture_default_str()->check(CLI::PositiveNumber);
  t->add_option("--learning-rate", tr.config.learning_rate)->capture_default_str()->check(CLI::PositiveNumber);
  t->add_option("--optimizer", tr.optimizer)->capture_default_str()->check(CLI::IsMember({"adam", "sgd"}));

  BenchArgs be;
  auto* b = app.add_subcommand("bench", "Cold/warm inference latency and surrogate speedup, as JSON");
  b->add_option("--surrogate", be.surrogate, "Weights JSON")->required();
  b->add_option("--grid", be.cell, "Grid cell size in metres")->capture_default_str()->check(CLI::PositiveNumber);
  b->add_option("--repeats", be.repeats, "Warm inference steps")->capture_default_str()->check(CLI::PositiveNumber);
  b->add_option("--cold-repeats", be.cold_repeats)->capture_default_str()->check(CLI::PositiveNumber);
  b->add_option("--sim-samples", be.sim_samples, "Simulator runs to time")->capture_default_str();
  b->add_option("--seed", be.seed)->capture_default_str();
  b->add_option("--threads", be.threads)->capture_default_str()->check(CLI::PositiveNumber);

  SimulateArgs si;
  auto* s = app.add_subcommand("simulate", "Run the pick-and-place task under one or all policies");
  s->add_option("--policy", si.policy)
      ->capture_default_str()
      ->check(CLI::IsMember({"all", "solo_human", "solo_robot", "turn_taking", "intent_prediction"}));
  s->add_option("--seeds", si.seeds, "Runs per policy")->capture_default_str()->check(CLI::PositiveNumber);
  s->add_option("--seed-base", si.seed_base)->capture_default_str();
  s->add_option("--out", si.out, "Output directory")->required();
  s->add_option("--surrogate", si.surrogate, "Weights JSON for inference (simulator when omitted)");
  s->add_option("--grid", si.cell, "Grid cell size in metres")->capture_default_str()->check(CLI::PositiveNumber);
  s->add_option("--scene", si.scene, "Fixed scene JSON (seeded random scenes when omitted)");

  InferArgs in;
  auto* f = app.add_subcommand("infer-file", "Posterior over reach targets for a recorded trajectory");
  f->add_option("--surrogate", in.surrogate, "Weights JSON")->required();
  f->add_option("--scene", in.scene, "Scene JSON");
  f->add_option("--trajectory", in.trajectory, ".itrj/.jsonl dataset or {points:[...]} JSON")->required();
  f->add_option("--record", in.record, "Record index for datasets")->capture_default_str();
  f->add_option("--fraction", in.fraction, "Observed fraction of the trajectory")->capture_default_str();
  f->add_option("--prior", in.prior)
      ->capture_default_str()
      ->check(CLI::IsMember({"combined", "objects", "proximity", "flat"}));
  f->add_option("--emit-posterior", in.emit, "Write the posterior as IPOS");
  f->add_option("--kernel", in.kernel)->capture_default_str()->check(CLI::IsMember({"gaussian", "indicator"}));
  f->add_option("--similarity", in.similarity)
      ->capture_default_str()
      ->check(CLI::IsMember({"windowed_mse", "hausdorff", "frechet"}));
  f->add_option("--bandwidth", in.bandwidth)->capture_default_str()->check(CLI::PositiveNumber);
  f->add_option("--epsilon", in.epsilon)->capture_default_str()->check(CLI::PositiveNumber);
  f->add_option("--threads", in.threads)->capture_default_str()->check(CLI::PositiveNumber);

  ServeArgs sv;
  auto* v = app.add_subcommand("serve", "Live inference sessions over newline-delimited JSON/TCP");
  v->add_option("--port", sv.port)->capture_default_str()->check(CLI::Range(0, 65535));
  v->add_option("--host", sv.host)->capture_default_str();
  v->add_option("--surrogate", sv.surrogate, "Weights JSON")->required();
  v->add_option("--scene", sv.scene, "Default scene JSON");
  v->add_option("--threads", sv.threads)->capture_default_str()->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (g->parsed()) return gen_dataset(gen);
    if (t->parsed()) return train_cmd(tr);
    if (b->parsed()) return bench(be);
    if (s->parsed()) return simulate(si);
    if (f->parsed()) return infer_file(in);
    if (v->parsed()) return serve(sv);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
