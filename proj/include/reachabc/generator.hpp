#pragma once

#include "reachabc/controller.hpp"
#include "reachabc/surrogate.hpp"

#include <functional>
#include <memory>
#include <span>
#include <string>

namespace reachabc {

// Anything that maps reach targets to onset-aligned trajectories. The tag
// identifies the generator (kind + parameter hash) so cached trajectories can
// be checked against the generator that is asked to reuse them.
class TrajectoryGenerator {
 public:
  virtual ~TrajectoryGenerator() = default;

  virtual std::string tag() const = 0;
  virtual int points() const = 0;
  virtual double dt() const = 0;
  // Row-major [target][point][xyz]; out.size() == targets.size()*points()*3.
  virtual void generate_flat(std::span<const Vec3> targets, std::span<float> out) const = 0;

  Trajectory generate(const Vec3& target) const;
};

class SimulatorGenerator final : public TrajectoryGenerator {
 public:
  SimulatorGenerator(ArmModel model, ControllerGains gains, Scene scene);

  std::string tag() const override { return tag_; }
  int points() const override { return gains_.horizon; }
  double dt() const override { return gains_.dt; }
  void generate_flat(std::span<const Vec3> targets, std::span<float> out) const override;

  const ArmModel& model() const { return model_; }
  const ControllerGains& gains() const { return gains_; }
  const Scene& scene() const { return scene_; }

 private:
  ArmModel model_;
  ControllerGains gains_;
  Scene scene_;
  JointVector start_;
  std::string tag_;
};

class SurrogateGenerator final : public TrajectoryGenerator {
 public:
  explicit SurrogateGenerator(std::shared_ptr<const SurrogateNet> net);

  std::string tag() const override { return tag_; }
  int points() const override { return net_->points(); }
  double dt() const override { return net_->dt(); }
  void generate_flat(std::span<const Vec3> targets, std::span<float> out) const override;

  const SurrogateNet& net() const { return *net_; }

 private:
  std::shared_ptr<const SurrogateNet> net_;
  std::string tag_;
};

// Wraps a plain function; used for toy problems and tests.
class FunctionGenerator final : public TrajectoryGenerator {
 public:
  using Fn = std::function<Trajectory(const Vec3&)>;

  FunctionGenerator(std::string tag, int points, double dt, Fn fn)
      : tag_(std::move(tag)), points_(points), dt_(dt), fn_(std::move(fn)) {}

  std::string tag() const override { return tag_; }
  int points() const override { return points_; }
  double dt() const override { return dt_; }
  void generate_flat(std::span<const Vec3> targets, std::span<float> out) const override;

 private:
  std::string tag_;
  int points_;
  double dt_;
  Fn fn_;
};

}  // namespace reachabc
