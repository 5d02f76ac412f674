#include "reachabc/controller.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace reachabc {

void ControllerGains::validate() const {
  if (!(dt > 0.0)) throw Error(ErrorCode::parameter, "dt must be positive");
  if (horizon < 1) throw Error(ErrorCode::parameter, "horizon must be at least 1");
  if (!(k_p >= 0.0 && k_i >= 0.0 && k_d >= 0.0 && k_rep >= 0.0)) {
    throw Error(ErrorCode::parameter, "gains must be non-negative");
  }
  if (substeps < 1) throw Error(ErrorCode::parameter, "substeps must be at least 1");
  if (!(damping >= 0.0)) throw Error(ErrorCode::parameter, "damping must be non-negative");
  if (!(repulsion_cutoff > 0.0)) throw Error(ErrorCode::parameter, "repulsion cutoff must be positive");
}

Vec3 repulsion_term(const Vec3& hand, std::span<const Vec3> obstacles, double k_rep, double cutoff,
                    Diagnostics* diagnostics) {
  if (!(cutoff > 0.0)) throw Error(ErrorCode::parameter, "repulsion cutoff must be positive");
  if (obstacles.empty()) return Vec3::Zero();

  const Vec3* nearest = nullptr;
  double best = std::numeric_limits<double>::infinity();
  for (const Vec3& o : obstacles) {
    const double d = (hand - o).norm();
    if (d < best) {
      best = d;
      nearest = &o;
    }
  }
  if (best >= cutoff) return Vec3::Zero();

  Vec3 away = hand - *nearest;
  double d = best;
  if (d < 1e-6) {
    report(diagnostics, "repulsion: hand coincident with obstacle, distance clamped to 1e-6");
    d = 1e-6;
    // Direction is undefined at coincidence; push straight up off the table.
    if (away.norm() < 1e-12) away = Vec3::UnitZ() * d;
  }
  return k_rep * away * (1.0 - d / cutoff) / d;
}

JointVector start_posture(const ArmModel& model) { return model.theta_sec; }

void check_target(const ArmModel& model, const ControllerGains& gains, const Scene& scene,
                  const Vec3& target) {
  if (!target.allFinite()) throw Error(ErrorCode::domain, "target is not finite");
  const Vec2 plane = scene.table.to_plane(target);
  if (!scene.table.contains(plane, gains.workspace_margin)) {
    std::ostringstream msg;
    msg << "target (" << target.transpose() << ") outside the table workspace";
    throw Error(ErrorCode::domain, msg.str());
  }
  const double reach = (target - model.base_pose.translation()).norm();
  if (reach > model.max_reach_from_base()) {
    std::ostringstream msg;
    msg << "target (" << target.transpose() << ") beyond arm reach (" << reach << " m)";
    throw Error(ErrorCode::domain, msg.str());
  }
}

Trajectory generate(const ArmModel& model, const ControllerGains& gains, const Scene& scene,
                    const JointVector& start_theta, const Vec3& target,
                    std::vector<JointState>* joint_log) {
  gains.validate();
  check_target(model, gains, scene, target);
  if (!model.within_limits(start_theta)) {
    throw Error(ErrorCode::domain, "start posture outside joint limits");
  }

  const double h = gains.dt / gains.substeps;
  JointVector theta = start_theta;
  JointVector theta_dot = JointVector::Zero();
  Vec3 integral = Vec3::Zero();
  Vec3 previous_error = Vec3::Zero();
  bool first = true;

  Trajectory out;
  out.dt = gains.dt;
  out.points.reserve(gains.horizon);
  if (joint_log != nullptr) joint_log->clear();

  for (int k = 0; k < gains.horizon; ++k) {
    out.points.push_back(forward_kinematics(model, theta));
    if (joint_log != nullptr) joint_log->push_back({theta, theta_dot});
    if (k + 1 == gains.horizon) break;

    for (int s = 0; s < gains.substeps; ++s) {
      const Vec3 hand = forward_kinematics(model, theta);
      const Vec3 error = target - hand;

      integral += error * h;
      const double windup = integral.norm();
      if (windup > gains.integral_limit) integral *= gains.integral_limit / windup;

      const Vec3 error_rate = first ? Vec3::Zero() : Vec3((error - previous_error) / h);
      previous_error = error;
      first = false;

      const Vec3 task_velocity = gains.k_p * error + gains.k_i * integral + gains.k_d * error_rate +
                                 repulsion_term(hand, scene.obstacles, gains.k_rep, gains.repulsion_cutoff);

      const JacobianMatrix J = jacobian(model, theta);
      const PseudoInverseMatrix J_dagger = pseudo_inverse(J, gains.damping);
      theta_dot = J_dagger * task_velocity +
                  nullspace_projector(J_dagger, J) * (model.theta_sec - theta);
      theta = model.clamp(theta + h * theta_dot);
    }
  }
  return out;
}

std::vector<Trajectory> batch_generate(const ArmModel& model, const ControllerGains& gains,
                                       const Scene& scene, const JointVector& start_theta,
                                       std::span<const Vec3> targets) {
  for (std::size_t i = 0; i < targets.size(); ++i) {
    try {
      check_target(model, gains, scene, targets[i]);
    } catch (const Error& e) {
      throw Error(e.code(), "target " + std::to_string(i) + ": " + e.what());
    }
  }
  std::vector<Trajectory> out;
  out.reserve(targets.size());
  for (const Vec3& t : targets) out.push_back(generate(model, gains, scene, start_theta, t));
  return out;
}

}  // namespace reachabc
