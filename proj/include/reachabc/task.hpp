#pragma once

#include "reachabc/generator.hpp"
#include "reachabc/inference.hpp"
#include "reachabc/priors.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace reachabc {

enum class Agent { human, robot };
enum class ActionKind { reach, grasp, transport, release, retreat };

std::string to_string(Agent agent);
std::string to_string(ActionKind kind);

struct AtomicAction {
  Agent agent = Agent::human;
  ActionKind kind = ActionKind::reach;
  double t_start = 0.0;
  double t_end = 0.0;
  std::optional<int> object_id;
  bool aborted = false;  // robot reach cut short by the safety override

  double duration() const { return t_end - t_start; }
};

struct TaskLog {
  std::vector<AtomicAction> actions;
  double t0 = 0.0;
  double t_final = 0.0;
  std::string policy;
  std::uint64_t seed = 0;

  int placements() const;
  std::vector<AtomicAction> of(Agent agent) const;
};

// ---- simulated human ------------------------------------------------------

struct HumanConfig {
  double noise_sigma = 0.003;     // m, per hand sample
  double gaze_sigma = 0.02;       // m, per gaze sample
  double gaze_lead = 0.3;         // s, gaze settles on the target before onset
  double transport_speed = 0.8;   // m/s
  double retreat_speed = 0.8;     // m/s
  double grasp_time = 0.25;
  double release_time = 0.25;
  double stop_speed = 0.05;       // m/s, reach ends once the hand slows below this
};

// A reach generated by the trajectory generator and cut where the hand comes
// to rest. The last point is the grasp location.
Trajectory truncate_reach(const Trajectory& reach, double stop_speed);

struct ManipulationEvent {
  ActionKind kind = ActionKind::grasp;  // grasp or release
  double t_start = 0.0;
  double t_end = 0.0;
};

struct HumanStream {
  Trajectory hand;                    // fixed-rate samples from t = 0
  std::vector<TimedPoint> gaze;       // same clock as hand
  std::vector<AtomicAction> truth;    // ground-truth phases
  std::vector<ManipulationEvent> events;
  Vec3 rest = Vec3::Zero();
};

// Back-to-back pick-and-place cycles to the listed objects, starting and
// ending at the generator's start position.
HumanStream simulate_human(const Scene& scene, std::span<const int> targets, const TrajectoryGenerator& generator,
                           const HumanConfig& config, std::uint64_t seed);

// ---- phase segmentation ---------------------------------------------------

struct SegmentationConfig {
  double speed_threshold = 0.05;  // m/s
  double hysteresis = 0.1;        // s a speed state must persist
  int smoothing = 5;              // centred moving-average width (odd)
  std::optional<Vec3> rest;       // splits retreat+reach bouts that pass through rest
  double rest_tolerance = 0.03;
};

struct Segmentation {
  std::vector<AtomicAction> actions;
  double idle = 0.0;
};

Segmentation segment_phases(const Trajectory& hand, std::span<const ManipulationEvent> events,
                            const SegmentationConfig& config = {}, Diagnostics* diagnostics = nullptr);

// ---- policies -------------------------------------------------------------

enum class Policy { solo_human, solo_robot, turn_taking, intent_prediction };

std::string to_string(Policy policy);
Policy parse_policy(const std::string& name);

struct RobotConfig {
  double reach_time = 1.4;
  double grasp_time = 0.25;
  double transport_time = 1.6;
  double release_time = 0.25;
  double retreat_time = 0.5;
};

struct TaskConfig {
  HumanConfig human;
  RobotConfig robot;
  double conflict_radius = 0.10;
  double p_safe = 0.05;
  int commit_ticks = 3;
  double abort_threshold = 0.5;
  double deadlock_timeout = 10.0;
  PriorWeights prior_weights;
};

struct Engines {
  const TrajectoryGenerator* human_motion = nullptr;  // ground truth for the simulated human
  const TrajectoryGenerator* inference = nullptr;     // generator behind grid's cache
  const InferenceGrid* grid = nullptr;                // required by intent_prediction
  InferenceConfig inference_config{};
};

TaskLog run_policy(Policy policy, const Scene& scene, const Engines& engines, const TaskConfig& config,
                   std::uint64_t seed, Diagnostics* diagnostics = nullptr);

// Object the robot can take without crowding the human: probability below
// p_safe, farthest from every object above it. nullopt when none qualifies.
std::optional<int> choose_safe_object(std::span<const ObjectProbability> probs, const Scene& scene, double p_safe);

// ---- metrics and export ---------------------------------------------------

struct FluencyMetrics {
  double T = 0.0;
  std::optional<double> FD;      // mean per handover
  std::optional<double> FD_sum;  // per run
  std::optional<double> RI;
  std::optional<double> HI;
  int handovers = 0;
};

// Throws ErrorCode::incomplete_task unless the log holds 16 placements
// (or `placements` when given).
FluencyMetrics compute_metrics(const TaskLog& log, int placements = 16);

// Idle time of one agent inside [log.t0, log.t_final].
double idle_time(const TaskLog& log, Agent agent);

// Pairs of (human, robot) reach+grasp intervals that overlap in time while
// their targets lie closer than radius.
int safety_violations(const TaskLog& log, const Scene& scene, double radius);

nlohmann::json to_json(const AtomicAction& action);
void write_jsonl(std::ostream& os, const TaskLog& log);
TaskLog read_task_jsonl(std::istream& is);

std::string export_task_diagram(const TaskLog& log);

nlohmann::json metrics_summary(const std::string& policy, std::span<const std::uint64_t> seeds,
                               std::span<const FluencyMetrics> runs);

}  // namespace reachabc
