#include "reachabc/task.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

namespace reachabc {

std::string to_string(Policy policy) {
  switch (policy) {
    case Policy::solo_human: return "solo_human";
    case Policy::solo_robot: return "solo_robot";
    case Policy::turn_taking: return "turn_taking";
    case Policy::intent_prediction: return "intent_prediction";
  }
  return "unknown";
}

Policy parse_policy(const std::string& name) {
  for (Policy p : {Policy::solo_human, Policy::solo_robot, Policy::turn_taking, Policy::intent_prediction}) {
    if (to_string(p) == name) return p;
  }
  throw Error(ErrorCode::parameter, "unknown policy '" + name + "'");
}

int TaskLog::placements() const {
  return static_cast<int>(std::count_if(actions.begin(), actions.end(),
                                        [](const AtomicAction& a) { return a.kind == ActionKind::release; }));
}

std::vector<AtomicAction> TaskLog::of(Agent agent) const {
  std::vector<AtomicAction> out;
  for (const auto& a : actions) {
    if (a.agent == agent) out.push_back(a);
  }
  return out;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEps = 1e-9;

enum class Phase { idle, reach, grasp, wait_box, transport, release, retreat, done };
enum class ObjectState { table, held, placed };

struct AgentState {
  Agent who = Agent::human;
  Phase phase = Phase::idle;
  double phase_end = kInf;
  int target = -1;
  bool claim = false;  // target chosen but not yet grasped
  Vec3 hand = Vec3::Zero();
  double since = 0.0;  // entered idle / wait_box
  std::size_t action = 0;
};

class Simulation {
 public:
  Simulation(Policy policy, const Scene& scene, const Engines& engines, const TaskConfig& config,
             std::uint64_t seed, Diagnostics* diagnostics)
      : policy_(policy), scene_(scene), engines_(engines), config_(config), rng_(seed), diagnostics_(diagnostics) {
    log_.policy = to_string(policy);
    log_.seed = seed;
    state_.assign(scene.objects.size(), ObjectState::table);
    human_.who = Agent::human;
    robot_.who = Agent::robot;
    if (policy == Policy::solo_robot) human_.phase = Phase::done;
    if (policy == Policy::solo_human) robot_.phase = Phase::done;
    if (human_.phase != Phase::done) {
      if (!engines.human_motion) throw Error(ErrorCode::parameter, "simulated human needs a trajectory generator");
      rest_ = engines.human_motion->generate(scene.objects.front().position)[0];
      human_.hand = rest_;
    }
    if (policy == Policy::intent_prediction) {
      if (!engines.grid || !engines.inference) {
        throw Error(ErrorCode::parameter, "intent_prediction needs an inference grid and generator");
      }
    }
  }

  TaskLog run() {
    double now = 0.0;
    while (true) {
      settle(now);
      if (human_.phase == Phase::done && robot_.phase == Phase::done) break;
      double next = std::min(human_.phase_end, robot_.phase_end);
      if (tick_pending()) next = std::min(next, tick_time(tick_));
      if (robot_.phase == Phase::idle && policy_ != Policy::solo_robot && any_on_table()) {
        next = std::min(next, robot_.since + config_.deadlock_timeout);
      }
      if (!std::isfinite(next) || next > 3600.0) throw Error(ErrorCode::incomplete_task, "task simulation stalled");
      now = std::max(now, next);
    }
    double t0 = kInf, t1 = 0.0;
    for (const auto& a : log_.actions) {
      t0 = std::min(t0, a.t_start);
      t1 = std::max(t1, a.t_end);
    }
    log_.t0 = std::isfinite(t0) ? t0 : 0.0;
    log_.t_final = t1;
    return log_;
  }

 private:
  // ---- bookkeeping ----
  std::size_t index(int id) const { return *scene_.index_of(id); }
  Vec2 plane(int id) const { return scene_.table.to_plane(scene_.object(id).position); }
  bool on_table(int id) const { return state_[index(id)] == ObjectState::table; }
  bool any_on_table() const {
    return std::any_of(state_.begin(), state_.end(), [](ObjectState s) { return s == ObjectState::table; });
  }
  bool near(int a, int b) const { return (plane(a) - plane(b)).norm() < config_.conflict_radius; }
  bool hand_away() const {
    return human_.phase == Phase::wait_box || human_.phase == Phase::transport || human_.phase == Phase::release;
  }
  bool human_busy() const {
    return human_.phase == Phase::reach || human_.phase == Phase::grasp || human_.phase == Phase::wait_box ||
           human_.phase == Phase::transport || human_.phase == Phase::release;
  }

  void begin(AgentState& agent, ActionKind kind, double now, double duration, std::optional<int> object) {
    agent.action = log_.actions.size();
    log_.actions.push_back({agent.who, kind, now, now + duration, object, false});
    agent.phase_end = now + duration;
    switch (kind) {
      case ActionKind::reach: agent.phase = Phase::reach; break;
      case ActionKind::grasp: agent.phase = Phase::grasp; break;
      case ActionKind::transport: agent.phase = Phase::transport; break;
      case ActionKind::release: agent.phase = Phase::release; break;
      case ActionKind::retreat: agent.phase = Phase::retreat; break;
    }
  }

  void wait(AgentState& agent, Phase phase, double now) {
    agent.phase = phase;
    agent.phase_end = kInf;
    agent.since = now;
  }

  // ---- event processing ----
  void settle(double now) {
    for (int guard = 0; guard < 10000; ++guard) {
      if (tick_pending() && tick_time(tick_) <= now + kEps) {
        process_tick(now);
        ++tick_;
        continue;
      }
      bool changed = false;
      for (AgentState* a : {&human_, &robot_}) {
        if (a->phase_end <= now + kEps) {
          complete(*a, now);
          changed = true;
        }
      }
      if (changed) continue;
      changed = start_human(now) || start_robot(now) || start_box(now);
      if (!changed) return;
    }
    throw Error(ErrorCode::incomplete_task, "task simulation did not settle");
  }

  void complete(AgentState& a, double now) {
    const bool human = a.who == Agent::human;
    switch (a.phase) {
      case Phase::reach:
        if (on_table(a.target)) {
          begin(a, ActionKind::grasp, now, human ? config_.human.grasp_time : config_.robot.grasp_time, a.target);
        } else {
          a.claim = false;
          retreat(a, now);
        }
        break;
      case Phase::grasp:
        a.claim = false;
        if (on_table(a.target)) {
          state_[index(a.target)] = ObjectState::held;
          wait(a, Phase::wait_box, now);
        } else {
          retreat(a, now);
        }
        break;
      case Phase::transport:
        begin(a, ActionKind::release, now, human ? config_.human.release_time : config_.robot.release_time,
              a.target);
        break;
      case Phase::release:
        state_[index(a.target)] = ObjectState::placed;
        box_busy_ = false;
        a.hand = scene_.box_position;
        a.target = -1;
        retreat(a, now);
        if (human) retreat_started_ = now;
        break;
      case Phase::retreat:
        a.hand = human ? rest_ : a.hand;
        wait(a, Phase::idle, now);
        break;
      default: break;
    }
  }

  void retreat(AgentState& a, double now) {
    const double duration =
        a.who == Agent::human ? (rest_ - a.hand).norm() / config_.human.retreat_speed : config_.robot.retreat_time;
    begin(a, ActionKind::retreat, now, duration, std::nullopt);
  }

  bool start_box(double now) {
    if (box_busy_) return false;
    AgentState* pick = nullptr;
    for (AgentState* a : {&human_, &robot_}) {
      if (a->phase != Phase::wait_box) continue;
      if (a->who == Agent::robot && policy_ == Policy::intent_prediction && human_busy()) continue;
      if (!pick || a->since < pick->since - kEps) pick = a;
    }
    if (!pick) return false;
    box_busy_ = true;
    const double duration = pick->who == Agent::human
                                ? (scene_.box_position - pick->hand).norm() / config_.human.transport_speed
                                : config_.robot.transport_time;
    begin(*pick, ActionKind::transport, now, duration, pick->target);
    return true;
  }

  bool start_human(double now) {
    if (human_.phase != Phase::idle) return false;
    std::vector<int> options;
    bool any = false;
    for (const auto& o : scene_.objects) {
      if (!on_table(o.id)) continue;
      any = true;
      if (robot_.claim && (o.id == robot_.target || near(o.id, robot_.target))) continue;
      options.push_back(o.id);
    }
    if (!any) {
      human_.phase = Phase::done;
      human_.phase_end = kInf;
      return true;
    }
    if (options.empty()) return false;
    std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
    const int id = options[pick(rng_)];
    start_human_reach(id, now);
    return true;
  }

  const Trajectory& reach_for(int id) {
    auto it = reaches_.find(id);
    if (it == reaches_.end()) {
      it = reaches_
               .emplace(id, truncate_reach(engines_.human_motion->generate(scene_.object(id).position),
                                           config_.human.stop_speed))
               .first;
    }
    return it->second;
  }

  void start_human_reach(int id, double now) {
    const Trajectory& clean = reach_for(id);
    observed_ = clean;
    observed_.t0 = now;
    std::normal_distribution<double> noise(0.0, config_.human.noise_sigma);
    if (config_.human.noise_sigma > 0.0) {
      for (Vec3& p : observed_.points) p += Vec3(noise(rng_), noise(rng_), noise(rng_));
    }
    human_.target = id;
    human_.claim = true;
    human_.hand = clean.points.back();
    begin(human_, ActionKind::reach, now, clean.dt * static_cast<double>(clean.size() - 1), id);

    if (policy_ == Policy::intent_prediction) {
      tick_ = 0;
      streak_ = 0;
      candidate_ = -1;
      gaze_ = GazeBuffer(1.0);
      const double dt = clean.dt;
      const int lead = static_cast<int>(std::ceil(config_.human.gaze_lead / dt - kEps));
      for (int j = lead; j >= 1; --j) push_gaze(now - dt * j);
    }
  }

  void push_gaze(double t) {
    std::normal_distribution<double> jitter(0.0, config_.human.gaze_sigma);
    gaze_.push(t, plane(human_.target) + Vec2(jitter(rng_), jitter(rng_)));
  }

  int nearest_to_robot(bool avoid_human) const {
    const Vec2 base = scene_.table.to_plane(kRobotBase);
    int best = -1;
    double best_d = kInf;
    for (const auto& o : scene_.objects) {
      if (!on_table(o.id)) continue;
      if (human_.claim && (o.id == human_.target || (avoid_human && near(o.id, human_.target)))) continue;
      const double d = (plane(o.id) - base).norm();
      if (d < best_d - kEps) {
        best_d = d;
        best = o.id;
      }
    }
    return best;
  }

  bool start_robot(double now) {
    if (robot_.phase != Phase::idle) return false;
    if (!any_on_table()) {
      robot_.phase = Phase::done;
      robot_.phase_end = kInf;
      return true;
    }
    bool go = false;
    switch (policy_) {
      case Policy::solo_robot: go = true; break;
      case Policy::turn_taking:
      case Policy::intent_prediction:
        go = std::abs(now - retreat_started_) < kEps || human_.phase == Phase::done;
        // With anticipation the robot also moves while the human hand is
        // away from the objects (carrying to the box).
        if (policy_ == Policy::intent_prediction) go = go || hand_away();
        if (!go && now - robot_.since >= config_.deadlock_timeout - kEps) {
          report(diagnostics_, "deadlock timeout: robot takes the nearest object");
          go = true;
        }
        break;
      case Policy::solo_human: return false;
    }
    if (!go) return false;
    const int id = nearest_to_robot(true);
    if (id < 0) return false;
    start_robot_reach(id, now);
    return true;
  }

  void start_robot_reach(int id, double now) {
    robot_.target = id;
    robot_.claim = true;
    begin(robot_, ActionKind::reach, now, config_.robot.reach_time, id);
  }

  // ---- anticipation ----
  bool tick_pending() const {
    return policy_ == Policy::intent_prediction && human_.phase == Phase::reach && tick_ < observed_.size();
  }
  double tick_time(std::size_t k) const { return observed_.t0 + observed_.dt * static_cast<double>(k); }

  void process_tick(double now) {
    const double t = tick_time(tick_);
    push_gaze(t);
    if (robot_.phase != Phase::idle && !(robot_.phase == Phase::reach && robot_.claim)) return;

    Scene visible = scene_;
    visible.objects.clear();
    for (const auto& o : scene_.objects) {
      if (on_table(o.id)) visible.objects.push_back(o);
    }
    if (visible.objects.empty()) return;

    const PriorSpec prior =
        combined_prior(visible, scene_.table.to_plane(rest_), &gaze_, t, config_.prior_weights);
    Trajectory obs = observed_;
    obs.t0 = 0.0;
    const PosteriorEstimate posterior = grid_posterior(*engines_.grid, prior, *engines_.inference,
                                                       engines_.inference_config, obs, tick_, nullptr);
    const auto probs = decision_summary(posterior, *engines_.grid, visible, config_.conflict_radius);
    std::map<int, double> p;
    for (const auto& op : probs) p[op.id] = op.probability;

    if (robot_.phase == Phase::reach) {
      if (p.count(robot_.target) && p[robot_.target] > config_.abort_threshold) {
        report(diagnostics_, "safety override: robot aborts reach to object " + std::to_string(robot_.target));
        log_.actions[robot_.action].t_end = now;
        log_.actions[robot_.action].aborted = true;
        robot_.claim = false;
        robot_.target = -1;
        retreat(robot_, now);
      }
      return;
    }

    const int best = choose_safe_object(probs, visible, config_.p_safe).value_or(-1);
    if (best < 0) {
      streak_ = 0;
      candidate_ = -1;
      return;
    }
    streak_ = best == candidate_ ? streak_ + 1 : 1;
    candidate_ = best;
    if (streak_ >= config_.commit_ticks) start_robot_reach(best, now);
  }

  Policy policy_;
  const Scene& scene_;
  const Engines& engines_;
  TaskConfig config_;
  Rng rng_;
  Diagnostics* diagnostics_;

  TaskLog log_;
  std::vector<ObjectState> state_;
  AgentState human_;
  AgentState robot_;
  Vec3 rest_ = Vec3::Zero();
  bool box_busy_ = false;
  double retreat_started_ = -kInf;
  std::map<int, Trajectory> reaches_;

  Trajectory observed_;
  std::size_t tick_ = 0;
  GazeBuffer gaze_{1.0};
  int candidate_ = -1;
  int streak_ = 0;
};

}  // namespace

std::optional<int> choose_safe_object(std::span<const ObjectProbability> probs, const Scene& scene, double p_safe) {
  std::map<int, double> p;
  for (const auto& op : probs) p[op.id] = op.probability;
  std::optional<int> best;
  double best_clearance = -1.0;
  for (const auto& o : scene.objects) {
    if (p[o.id] >= p_safe) continue;
    double clearance = kInf;
    for (const auto& other : scene.objects) {
      if (p[other.id] > p_safe) {
        clearance = std::min(clearance, (scene.table.to_plane(o.position) - scene.table.to_plane(other.position)).norm());
      }
    }
    if (clearance > best_clearance + kEps) {
      best_clearance = clearance;
      best = o.id;
    }
  }
  return best;
}

TaskLog run_policy(Policy policy, const Scene& scene, const Engines& engines, const TaskConfig& config,
                   std::uint64_t seed, Diagnostics* diagnostics) {
  scene.validate();
  if (scene.objects.empty()) throw Error(ErrorCode::empty_scene, "task needs objects");
  Simulation sim(policy, scene, engines, config, seed, diagnostics);
  return sim.run();
}

}  // namespace reachabc
