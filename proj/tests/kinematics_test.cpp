#include "reachabc/anthropometry.hpp"
#include "reachabc/kinematics.hpp"

#include <gtest/gtest.h>

#include <random>

namespace reachabc {
namespace {

JointVector random_posture(const ArmModel& model, std::mt19937_64& rng, double shrink = 0.95) {
  JointVector theta;
  for (int i = 0; i < kNumJoints; ++i) {
    const auto& lim = model.joint_limits[i];
    std::uniform_real_distribution<double> u(shrink * lim.lower, shrink * lim.upper);
    theta[i] = u(rng);
  }
  return theta;
}

TEST(ForwardKinematics, ZeroPostureIsFixedConstant) {
  const ArmModel model = ArmModel::standard();
  const Vec3 p = forward_kinematics(model, JointVector::Zero());
  // hip + (-offset, 0, torso) + (0, 0, -(upper + forearm + hand))
  EXPECT_NEAR(p.x(), -0.20, 1e-12);
  EXPECT_NEAR(p.y(), -0.25, 1e-12);
  EXPECT_NEAR(p.z(), -0.05 + 0.55 - 0.72, 1e-12);
}

TEST(ForwardKinematics, StartPostureHandAboveTable) {
  const ArmModel model = ArmModel::standard();
  const Vec3 p = forward_kinematics(model, model.theta_sec);
  EXPECT_NEAR(p.x(), -0.2, 1e-3);
  EXPECT_NEAR(p.y(), 0.124, 1e-3);
  EXPECT_NEAR(p.z(), 0.038, 1e-3);
}

TEST(ForwardKinematics, SingleJointPerturbationBoundedByDistalLength) {
  const ArmModel model = ArmModel::standard();
  const auto& L = model.link_lengths;
  // Distance from joint i to the hand is at most the links after it.
  const double distal[kNumJoints] = {
      std::hypot(L.torso, L.shoulder_offset) + L.arm_span(), std::hypot(L.torso, L.shoulder_offset) + L.arm_span(),
      std::hypot(L.torso, L.shoulder_offset) + L.arm_span(), L.arm_span(), L.arm_span(), L.arm_span(),
      L.forearm + L.hand, L.hand, L.hand};
  std::mt19937_64 rng(1);
  const double delta = 1e-3;
  for (int trial = 0; trial < 200; ++trial) {
    const JointVector theta = random_posture(model, rng, 0.9);
    const Vec3 p = forward_kinematics(model, theta);
    for (int i = 0; i < kNumJoints; ++i) {
      JointVector t = theta;
      t[i] += delta;
      EXPECT_LE((forward_kinematics(model, t) - p).norm(), delta * distal[i] + 1e-12);
    }
  }
}

TEST(ForwardKinematics, BaseTranslationIsEquivariant) {
  ArmModel model = ArmModel::standard();
  const JointVector theta = model.theta_sec;
  const Vec3 before = forward_kinematics(model, theta);
  const Vec3 t(0.3, -0.1, 0.25);
  model.base_pose.pretranslate(t);
  EXPECT_LT((forward_kinematics(model, theta) - (before + t)).norm(), 1e-12);
}

TEST(ForwardKinematics, OutsideLimitsIsDomainError) {
  const ArmModel model = ArmModel::standard();
  JointVector theta = JointVector::Zero();
  theta[2] = model.joint_limits[2].upper + 0.1;
  try {
    forward_kinematics(model, theta);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::domain);
  }
}

TEST(Jacobian, MatchesFiniteDifferencesOverRandomPostures) {
  const ArmModel model = ArmModel::standard();
  std::mt19937_64 rng(42);
  const double h = 1e-6;
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const JointVector theta = random_posture(model, rng);
    const JacobianMatrix J = jacobian(model, theta);
    for (int i = 0; i < kNumJoints; ++i) {
      JointVector plus = theta, minus = theta;
      plus[i] += h;
      minus[i] -= h;
      const Vec3 central = (forward_kinematics(model, plus) - forward_kinematics(model, minus)) / 2.0;
      worst = std::max(worst, (J.col(i) * h - central).norm());
    }
  }
  EXPECT_LE(worst, 1e-5);
}

TEST(Jacobian, AxisThroughHandGivesZeroColumn) {
  ArmModel model = ArmModel::standard();
  model.link_lengths.hand = 0.0;  // both wrist axes now pass through the hand point
  const JacobianMatrix J = jacobian(model, model.theta_sec);
  EXPECT_LT(J.col(7).norm(), 1e-12);
  EXPECT_LT(J.col(8).norm(), 1e-12);
  EXPECT_GT(J.col(6).norm(), 0.1);
}

TEST(PseudoInverse, IdentityBlock) {
  JacobianMatrix J = JacobianMatrix::Zero();
  J.leftCols<3>().setIdentity();
  const PseudoInverseMatrix Jd = pseudo_inverse(J, 0.0);
  PseudoInverseMatrix expected = PseudoInverseMatrix::Zero();
  expected.topRows<3>().setIdentity();
  EXPECT_LT((Jd - expected).norm(), 1e-12);
}

TEST(PseudoInverse, MoorePenroseOnFullRank) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    JacobianMatrix J;
    for (Eigen::Index i = 0; i < J.size(); ++i) J.data()[i] = n(rng);
    const PseudoInverseMatrix Jd = pseudo_inverse(J, 0.0);
    EXPECT_LT((J * Jd * J - J).norm(), 1e-9);
  }
}

TEST(PseudoInverse, DampingBoundsNorm) {
  JacobianMatrix J = JacobianMatrix::Zero();
  J(0, 0) = 1.0;
  J(1, 1) = 1.0;
  J(2, 2) = 1e-7;  // nearly singular
  const double lambda = 0.01;
  const PseudoInverseMatrix Jd = pseudo_inverse(J, lambda);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Jd);
  EXPECT_LE(svd.singularValues()(0), 1.0 / (2.0 * lambda) + 1e-9);
}

TEST(PseudoInverse, UndampedSingularThrows) {
  JacobianMatrix J = JacobianMatrix::Zero();
  J(0, 0) = 1.0;
  J(1, 0) = 1.0;
  try {
    pseudo_inverse(J, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::singularity);
  }
}

TEST(Nullspace, IdentityBlockProjector) {
  JacobianMatrix J = JacobianMatrix::Zero();
  J.leftCols<3>().setIdentity();
  const NullspaceMatrix N = nullspace_projector(pseudo_inverse(J, 0.0), J);
  NullspaceMatrix expected = NullspaceMatrix::Identity();
  expected.topLeftCorner<3, 3>().setZero();
  EXPECT_LT((N - expected).norm(), 1e-12);
}

TEST(Nullspace, AnnihilatesAndIsIdempotent) {
  const ArmModel model = ArmModel::standard();
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const JacobianMatrix J = jacobian(model, random_posture(model, rng));
    const NullspaceMatrix N = nullspace_projector(pseudo_inverse(J, 0.0), J);
    EXPECT_LT((N * N - N).norm(), 1e-8);
    for (int k = 0; k < 100; ++k) {
      JointVector v;
      for (int i = 0; i < kNumJoints; ++i) v[i] = n(rng);
      EXPECT_LE((J * N * v).norm(), 1e-8);
    }
  }
}

TEST(ArmModel, JsonRoundTrip) {
  const ArmModel model = ArmModel::standard();
  nlohmann::json j = model;
  const ArmModel back = j.get<ArmModel>();
  const JointVector theta = model.theta_sec;
  EXPECT_EQ(forward_kinematics(model, theta), forward_kinematics(back, theta));
}

TEST(ArmModel, RejectsNonUnitAxis) {
  ArmModel model = ArmModel::standard();
  model.joint_axes[3] = Vec3(1.0, 1.0, 0.0);
  EXPECT_THROW(model.validate(), Error);
}

}  // namespace
}  // namespace reachabc
