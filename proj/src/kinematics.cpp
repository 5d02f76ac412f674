#include "reachabc/kinematics.hpp"

#include "reachabc/anthropometry.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>

#include <cmath>
#include <sstream>

namespace reachabc {
namespace {

// Translation applied after joint i (in the frame of joint i) for the fixed
// layout: torso column after the torso roll, then segments down the arm.
Vec3 link_after_joint(const LinkLengths& l, int joint) {
  switch (joint) {
    case 2: return Vec3(-l.shoulder_offset, 0.0, l.torso);
    case 5: return Vec3(0.0, 0.0, -l.upper_arm);
    case 6: return Vec3(0.0, 0.0, -l.forearm);
    case 8: return Vec3(0.0, 0.0, -l.hand);
    default: return Vec3::Zero();
  }
}

struct ChainPose {
  std::array<Vec3, kNumJoints> origin;
  std::array<Vec3, kNumJoints> axis;
  Vec3 shoulder;
  Vec3 hand;
};

ChainPose walk_chain(const ArmModel& model, const JointVector& theta) {
  ChainPose pose;
  Eigen::Matrix3d R = model.base_pose.linear();
  Vec3 p = model.base_pose.translation();
  for (int i = 0; i < kNumJoints; ++i) {
    pose.origin[i] = p;
    pose.axis[i] = R * model.joint_axes[i];
    R = R * Eigen::AngleAxisd(theta[i], model.joint_axes[i]).toRotationMatrix();
    p += R * link_after_joint(model.link_lengths, i);
    if (i == 2) pose.shoulder = p;
  }
  pose.hand = p;
  return pose;
}

void check_limits(const ArmModel& model, const JointVector& theta) {
  if (!model.within_limits(theta, 1e-9)) {
    std::ostringstream msg;
    msg << "joint configuration outside limits:";
    for (int i = 0; i < kNumJoints; ++i) msg << ' ' << theta[i];
    throw Error(ErrorCode::domain, msg.str());
  }
}

}  // namespace

ArmModel ArmModel::standard() {
  namespace a = anthropometry;
  ArmModel m;
  m.link_lengths = {a::kTorso, a::kShoulderOffset, a::kUpperArm, a::kForearm, a::kHand};
  const Vec3 x = Vec3::UnitX(), y = Vec3::UnitY(), z = Vec3::UnitZ();
  m.joint_axes = {z, x, y, x, y, z, x, x, y};
  for (int i = 0; i < kNumJoints; ++i) {
    m.joint_limits[i] = {-a::kJointLimit[i], a::kJointLimit[i]};
    m.theta_sec[i] = a::kRestPosture[i];
  }
  m.base_pose = Eigen::Isometry3d::Identity();
  m.base_pose.translation() = Vec3(a::kHipPosition[0], a::kHipPosition[1], a::kHipPosition[2]);
  m.validate();
  return m;
}

void ArmModel::validate() const {
  const LinkLengths& l = link_lengths;
  if (!(l.torso > 0 && l.shoulder_offset > 0 && l.upper_arm > 0 && l.forearm > 0 && l.hand > 0)) {
    throw Error(ErrorCode::parameter, "all link lengths must be positive");
  }
  for (int i = 0; i < kNumJoints; ++i) {
    if (std::abs(joint_axes[i].norm() - 1.0) > 1e-9) {
      throw Error(ErrorCode::parameter, "joint axis " + std::to_string(i) + " is not unit-norm");
    }
    if (!(joint_limits[i].lower < joint_limits[i].upper)) {
      throw Error(ErrorCode::parameter, "joint limit " + std::to_string(i) + " has lower >= upper");
    }
  }
  if (!within_limits(theta_sec)) {
    throw Error(ErrorCode::parameter, "theta_sec outside joint limits");
  }
  const Eigen::Matrix3d R = base_pose.linear();
  if (!(R.transpose() * R).isIdentity(1e-9)) {
    throw Error(ErrorCode::parameter, "base_pose rotation is not orthonormal");
  }
}

bool ArmModel::within_limits(const JointVector& theta, double slack) const {
  for (int i = 0; i < kNumJoints; ++i) {
    if (!(theta[i] >= joint_limits[i].lower - slack && theta[i] <= joint_limits[i].upper + slack)) {
      return false;
    }
  }
  return true;
}

JointVector ArmModel::clamp(const JointVector& theta) const {
  JointVector out;
  for (int i = 0; i < kNumJoints; ++i) {
    out[i] = std::clamp(theta[i], joint_limits[i].lower, joint_limits[i].upper);
  }
  return out;
}

Vec3 ArmModel::shoulder_position(const JointVector& theta) const {
  return walk_chain(*this, theta).shoulder;
}

double ArmModel::max_reach_from_base() const {
  const double to_shoulder = std::hypot(link_lengths.torso, link_lengths.shoulder_offset);
  return to_shoulder + link_lengths.arm_span();
}

Vec3 forward_kinematics(const ArmModel& model, const JointVector& theta) {
  check_limits(model, theta);
  return walk_chain(model, theta).hand;
}

JacobianMatrix jacobian(const ArmModel& model, const JointVector& theta) {
  check_limits(model, theta);
  const ChainPose pose = walk_chain(model, theta);
  JacobianMatrix J;
  for (int i = 0; i < kNumJoints; ++i) {
    J.col(i) = pose.axis[i].cross(pose.hand - pose.origin[i]);
  }
  return J;
}

PseudoInverseMatrix pseudo_inverse(const JacobianMatrix& J, double damping) {
  if (!(damping >= 0.0)) {
    throw Error(ErrorCode::parameter, "damping must be non-negative");
  }
  Eigen::Matrix3d JJt = J * J.transpose();
  JJt.diagonal().array() += damping * damping;
  if (damping == 0.0) {
    // Rank test on the Gram matrix relative to its scale.
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(JJt, Eigen::EigenvaluesOnly);
    const double largest = eig.eigenvalues().maxCoeff();
    if (!(largest > 0.0) || eig.eigenvalues().minCoeff() <= 1e-12 * largest) {
      throw Error(ErrorCode::singularity, "rank-deficient Jacobian with zero damping");
    }
  }
  return J.transpose() * JJt.ldlt().solve(Eigen::Matrix3d::Identity());
}

NullspaceMatrix nullspace_projector(const PseudoInverseMatrix& J_dagger, const JacobianMatrix& J) {
  return NullspaceMatrix::Identity() - J_dagger * J;
}

void to_json(nlohmann::json& j, const ArmModel& model) {
  const LinkLengths& l = model.link_lengths;
  j["link_lengths"] = {{"torso", l.torso},
                       {"shoulder_offset", l.shoulder_offset},
                       {"upper_arm", l.upper_arm},
                       {"forearm", l.forearm},
                       {"hand", l.hand}};
  nlohmann::json axes = nlohmann::json::array();
  nlohmann::json limits = nlohmann::json::array();
  nlohmann::json sec = nlohmann::json::array();
  for (int i = 0; i < kNumJoints; ++i) {
    axes.push_back({model.joint_axes[i].x(), model.joint_axes[i].y(), model.joint_axes[i].z()});
    limits.push_back({model.joint_limits[i].lower, model.joint_limits[i].upper});
    sec.push_back(model.theta_sec[i]);
  }
  j["joint_axes"] = axes;
  j["joint_limits"] = limits;
  j["theta_sec"] = sec;
  const Vec3 t = model.base_pose.translation();
  const Eigen::Matrix3d R = model.base_pose.linear();
  j["base_pose"] = {
      {"translation", {t.x(), t.y(), t.z()}},
      {"rotation", {{R(0, 0), R(0, 1), R(0, 2)}, {R(1, 0), R(1, 1), R(1, 2)}, {R(2, 0), R(2, 1), R(2, 2)}}},
  };
}

void from_json(const nlohmann::json& j, ArmModel& model) {
  try {
    const auto& l = j.at("link_lengths");
    model.link_lengths = {l.at("torso").get<double>(), l.at("shoulder_offset").get<double>(),
                          l.at("upper_arm").get<double>(), l.at("forearm").get<double>(),
                          l.at("hand").get<double>()};
    const auto& axes = j.at("joint_axes");
    const auto& limits = j.at("joint_limits");
    const auto& sec = j.at("theta_sec");
    if (axes.size() != kNumJoints || limits.size() != kNumJoints || sec.size() != kNumJoints) {
      throw Error(ErrorCode::parameter, "arm model needs exactly 9 joints");
    }
    for (int i = 0; i < kNumJoints; ++i) {
      model.joint_axes[i] = Vec3(axes[i][0].get<double>(), axes[i][1].get<double>(), axes[i][2].get<double>());
      model.joint_limits[i] = {limits[i][0].get<double>(), limits[i][1].get<double>()};
      model.theta_sec[i] = sec[i].get<double>();
    }
    const auto& pose = j.at("base_pose");
    model.base_pose = Eigen::Isometry3d::Identity();
    const auto& t = pose.at("translation");
    model.base_pose.translation() = Vec3(t[0].get<double>(), t[1].get<double>(), t[2].get<double>());
    const auto& R = pose.at("rotation");
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) model.base_pose.linear()(r, c) = R.at(r).at(c).get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parameter, std::string("malformed arm model: ") + e.what());
  }
  model.validate();
}

}  // namespace reachabc
