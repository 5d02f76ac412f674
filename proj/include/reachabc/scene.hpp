#pragma once

#include "reachabc/common.hpp"

#include <Eigen/Geometry>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <vector>

namespace reachabc {

struct SceneObject {
  int id = 0;
  Vec3 position = Vec3::Zero();
  double extent = 0.05;
  double confidence = 1.0;
};

// Table surface frame. The workspace rectangle [origin, origin + size] is
// expressed in table-plane coordinates; `height` is the surface z.
struct TableFrame {
  Eigen::Isometry3d pose = Eigen::Isometry3d::Identity();
  Vec2 origin{-0.65, 0.05};
  Vec2 size{1.30, 0.70};

  double height() const { return pose.translation().z(); }
  bool contains(const Vec2& p, double margin = 0.0) const;
  Vec2 to_plane(const Vec3& world) const;
  Vec3 to_world(const Vec2& plane) const;
};

struct Scene {
  std::vector<SceneObject> objects;
  TableFrame table;
  Vec3 box_position{0.80, 0.40, 0.0};
  // Sources of the repulsive field (x_obj). Pickable objects are not listed
  // here: the hand has to close in on them.
  std::vector<Vec3> obstacles;

  void validate() const;
  const SceneObject& object(int id) const;
  std::optional<std::size_t> index_of(int id) const;
};

// Robot side of the table, used for "nearest to robot" choices.
inline const Vec3 kRobotBase{0.0, 1.05, 0.0};

struct SceneSampling {
  int count = 16;
  // Centre-to-centre floor: a 5 cm cube plus a 5 cm gap.
  double min_separation = 0.10;
  Vec2 region_origin{-0.45, 0.20};
  Vec2 region_size{0.90, 0.45};
  double extent = 0.05;
};

Scene default_scene();
Scene random_scene(std::uint64_t seed, const SceneSampling& sampling = {});

void to_json(nlohmann::json& j, const Scene& scene);
void from_json(const nlohmann::json& j, Scene& scene);

}  // namespace reachabc
