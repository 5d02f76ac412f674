#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <vector>

namespace reachabc {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;

inline constexpr int kNumJoints = 9;
using JointVector = Eigen::Matrix<double, kNumJoints, 1>;
using JacobianMatrix = Eigen::Matrix<double, 3, kNumJoints>;
using PseudoInverseMatrix = Eigen::Matrix<double, kNumJoints, 3>;
using NullspaceMatrix = Eigen::Matrix<double, kNumJoints, kNumJoints>;

enum class ErrorCode {
  domain,
  parameter,
  singularity,
  insufficient_data,
  empty_scene,
  alignment,
  stale_cache,
  corrupt_model,
  bad_magic,
  shape_mismatch,
  truncated,
  training_divergence,
  incomplete_task,
  io,
};

const char* to_string(ErrorCode code);

// Every failure raised by the library carries a machine-readable code so the
// CLI can map it onto its exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Non-fatal conditions (clamped distances, starved samplers, ...). Optional
// sink passed by pointer; nullptr means the caller does not care.
struct Diagnostics {
  std::vector<std::string> messages;

  void add(std::string message) { messages.push_back(std::move(message)); }
  bool empty() const { return messages.empty(); }
  bool contains(const std::string& needle) const;
};

inline void report(Diagnostics* sink, std::string message) {
  if (sink != nullptr) sink->add(std::move(message));
}

}  // namespace reachabc
