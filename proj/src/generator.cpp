#include "reachabc/generator.hpp"

#include "reachabc/codec.hpp"

#include <nlohmann/json.hpp>

namespace reachabc {

Trajectory TrajectoryGenerator::generate(const Vec3& target) const {
  const int n = points();
  std::vector<float> flat(static_cast<std::size_t>(n) * 3);
  generate_flat(std::span<const Vec3>(&target, 1), flat);
  Trajectory t;
  t.dt = dt();
  t.points.reserve(n);
  for (int k = 0; k < n; ++k) t.points.emplace_back(flat[3 * k], flat[3 * k + 1], flat[3 * k + 2]);
  return t;
}

namespace {

void check_out(std::span<const Vec3> targets, std::span<float> out, int points) {
  if (out.size() != targets.size() * static_cast<std::size_t>(points) * 3) {
    throw Error(ErrorCode::shape_mismatch, "generator output buffer has the wrong size");
  }
}

void store(const Trajectory& t, std::span<float> dst, int points) {
  if (t.size() != static_cast<std::size_t>(points)) {
    throw Error(ErrorCode::shape_mismatch, "generated trajectory has the wrong length");
  }
  for (int k = 0; k < points; ++k) {
    for (int a = 0; a < 3; ++a) dst[3 * k + a] = static_cast<float>(t[k][a]);
  }
}

}  // namespace

SimulatorGenerator::SimulatorGenerator(ArmModel model, ControllerGains gains, Scene scene)
    : model_(std::move(model)), gains_(gains), scene_(std::move(scene)), start_(start_posture(model_)) {
  gains_.validate();
  nlohmann::json j;
  j["model"] = model_;
  j["gains"] = {gains_.k_p, gains_.k_i, gains_.k_d, gains_.k_rep, gains_.dt, gains_.horizon,
                gains_.substeps, gains_.damping, gains_.integral_limit, gains_.repulsion_cutoff};
  nlohmann::json obstacles = nlohmann::json::array();
  for (const Vec3& o : scene_.obstacles) obstacles.push_back({o.x(), o.y(), o.z()});
  j["obstacles"] = obstacles;
  j["start"] = std::vector<double>(start_.data(), start_.data() + start_.size());
  const std::string text = j.dump();
  const auto digest = codec::sha256_hex(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  tag_ = "simulator:" + digest.substr(0, 16);
}

void SimulatorGenerator::generate_flat(std::span<const Vec3> targets, std::span<float> out) const {
  check_out(targets, out, points());
  const std::size_t stride = static_cast<std::size_t>(points()) * 3;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    try {
      store(reachabc::generate(model_, gains_, scene_, start_, targets[i]), out.subspan(i * stride, stride), points());
    } catch (const Error& e) {
      throw Error(e.code(), "target " + std::to_string(i) + ": " + e.what());
    }
  }
}

SurrogateGenerator::SurrogateGenerator(std::shared_ptr<const SurrogateNet> net) : net_(std::move(net)) {
  if (!net_) throw Error(ErrorCode::parameter, "surrogate generator needs a network");
  tag_ = "surrogate:" + net_->weights_hash();
}

void SurrogateGenerator::generate_flat(std::span<const Vec3> targets, std::span<float> out) const {
  check_out(targets, out, points());
  net_->batch_forward_flat(targets, out);
}

void FunctionGenerator::generate_flat(std::span<const Vec3> targets, std::span<float> out) const {
  check_out(targets, out, points_);
  const std::size_t stride = static_cast<std::size_t>(points_) * 3;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    try {
      store(fn_(targets[i]), out.subspan(i * stride, stride), points_);
    } catch (const Error& e) {
      throw Error(e.code(), "target " + std::to_string(i) + ": " + e.what());
    }
  }
}

}  // namespace reachabc
