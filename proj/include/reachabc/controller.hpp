#pragma once

#include "reachabc/kinematics.hpp"
#include "reachabc/scene.hpp"
#include "reachabc/trajectory.hpp"

#include <span>
#include <vector>

namespace reachabc {

// Task-space PID with a repulsive field, resolved to joint rates through the
// damped pseudo-inverse plus a nullspace pull toward the model's theta_sec.
struct ControllerGains {
  double k_p = 6.0;
  double k_i = 0.01;
  double k_d = 0.1;
  double k_rep = 8.5;
  double dt = kSampleDt;
  int horizon = kTrajectoryPoints;

  int substeps = 4;
  double damping = 0.01;
  double integral_limit = 1.0;      // m*s, anti-windup
  double repulsion_cutoff = 0.15;   // m
  double workspace_margin = 0.05;   // m

  void validate() const;
};

Vec3 repulsion_term(const Vec3& hand, std::span<const Vec3> obstacles, double k_rep, double cutoff,
                    Diagnostics* diagnostics = nullptr);

// Fixed start posture used for every generated reach and recorded in dataset
// metadata: the model's rest posture.
JointVector start_posture(const ArmModel& model);

// Throws ErrorCode::domain when the target is off the (margin-extended)
// workspace or beyond the arm's reach envelope.
void check_target(const ArmModel& model, const ControllerGains& gains, const Scene& scene,
                  const Vec3& target);

Trajectory generate(const ArmModel& model, const ControllerGains& gains, const Scene& scene,
                    const JointVector& start_theta, const Vec3& target,
                    std::vector<JointState>* joint_log = nullptr);

std::vector<Trajectory> batch_generate(const ArmModel& model, const ControllerGains& gains,
                                       const Scene& scene, const JointVector& start_theta,
                                       std::span<const Vec3> targets);

}  // namespace reachabc
