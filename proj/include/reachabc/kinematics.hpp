#pragma once

#include "reachabc/common.hpp"

#include <Eigen/Geometry>
#include <nlohmann/json.hpp>

#include <array>
#include <utility>

namespace reachabc {

struct LinkLengths {
  double torso = 0.0;
  double shoulder_offset = 0.0;
  double upper_arm = 0.0;
  double forearm = 0.0;
  double hand = 0.0;

  double arm_span() const { return upper_arm + forearm + hand; }
};

struct JointLimit {
  double lower = 0.0;
  double upper = 0.0;
};

/// Nine-joint torso + left arm chain. Immutable once validated; build through
/// ArmModel::standard() or from_json(), both of which call validate().
struct ArmModel {
  LinkLengths link_lengths;
  std::array<Vec3, kNumJoints> joint_axes;
  std::array<JointLimit, kNumJoints> joint_limits;
  JointVector theta_sec = JointVector::Zero();
  Eigen::Isometry3d base_pose = Eigen::Isometry3d::Identity();

  static ArmModel standard();

  // Throws ErrorCode::parameter naming the broken invariant.
  void validate() const;

  bool within_limits(const JointVector& theta, double slack = 0.0) const;
  JointVector clamp(const JointVector& theta) const;

  // Shoulder position for a posture; the reach check measures from here.
  Vec3 shoulder_position(const JointVector& theta) const;
  // Upper bound on hand distance from the hip over all postures.
  double max_reach_from_base() const;
};

struct JointState {
  JointVector theta = JointVector::Zero();
  JointVector theta_dot = JointVector::Zero();
};

Vec3 forward_kinematics(const ArmModel& model, const JointVector& theta);

JacobianMatrix jacobian(const ArmModel& model, const JointVector& theta);

// Damped least-squares inverse J^T (J J^T + damping^2 I)^-1. With damping 0 a
// rank-deficient J raises ErrorCode::singularity.
PseudoInverseMatrix pseudo_inverse(const JacobianMatrix& J, double damping);

// I - J_dagger J.
NullspaceMatrix nullspace_projector(const PseudoInverseMatrix& J_dagger,
                                    const JacobianMatrix& J);

void to_json(nlohmann::json& j, const ArmModel& model);
void from_json(const nlohmann::json& j, ArmModel& model);

}  // namespace reachabc
