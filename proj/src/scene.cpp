#include "reachabc/scene.hpp"

#include <random>

namespace reachabc {

bool TableFrame::contains(const Vec2& p, double margin) const {
  return p.x() >= origin.x() - margin && p.x() <= origin.x() + size.x() + margin &&
         p.y() >= origin.y() - margin && p.y() <= origin.y() + size.y() + margin;
}

Vec2 TableFrame::to_plane(const Vec3& world) const {
  const Vec3 local = pose.inverse() * world;
  return local.head<2>();
}

Vec3 TableFrame::to_world(const Vec2& plane) const {
  return pose * Vec3(plane.x(), plane.y(), 0.0);
}

void Scene::validate() const {
  for (const SceneObject& o : objects) {
    if (!(o.extent > 0.0)) {
      throw Error(ErrorCode::parameter, "object " + std::to_string(o.id) + " has non-positive extent");
    }
    if (!(o.confidence >= 0.0 && o.confidence <= 1.0)) {
      throw Error(ErrorCode::parameter, "object " + std::to_string(o.id) + " confidence outside [0,1]");
    }
    if (!table.contains(table.to_plane(o.position), 1e-9)) {
      throw Error(ErrorCode::parameter, "object " + std::to_string(o.id) + " lies off the table");
    }
  }
}

std::optional<std::size_t> Scene::index_of(int id) const {
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (objects[i].id == id) return i;
  }
  return std::nullopt;
}

const SceneObject& Scene::object(int id) const {
  const auto i = index_of(id);
  if (!i) throw Error(ErrorCode::parameter, "no object with id " + std::to_string(id));
  return objects[*i];
}

Scene default_scene() { return random_scene(0); }

Scene random_scene(std::uint64_t seed, const SceneSampling& sampling) {
  Scene scene;
  scene.obstacles = {scene.box_position};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(sampling.region_origin.x(),
                                            sampling.region_origin.x() + sampling.region_size.x());
  std::uniform_real_distribution<double> uy(sampling.region_origin.y(),
                                            sampling.region_origin.y() + sampling.region_size.y());
  int attempts = 0;
  while (static_cast<int>(scene.objects.size()) < sampling.count) {
    if (++attempts > 100000) {
      throw Error(ErrorCode::parameter, "cannot place objects with the requested separation");
    }
    const Vec3 candidate = scene.table.to_world(Vec2(ux(rng), uy(rng)));
    bool clear = true;
    for (const SceneObject& o : scene.objects) {
      if ((o.position - candidate).norm() < sampling.min_separation) {
        clear = false;
        break;
      }
    }
    if (!clear) continue;
    scene.objects.push_back({static_cast<int>(scene.objects.size()), candidate, sampling.extent, 1.0});
  }
  return scene;
}

namespace {
nlohmann::json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
Vec3 json_vec3(const nlohmann::json& j) {
  return Vec3(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>());
}
}  // namespace

void to_json(nlohmann::json& j, const Scene& scene) {
  j = nlohmann::json::object();
  nlohmann::json objects = nlohmann::json::array();
  for (const SceneObject& o : scene.objects) {
    objects.push_back({{"id", o.id},
                       {"position", vec_json(o.position)},
                       {"extent", o.extent},
                       {"confidence", o.confidence}});
  }
  j["objects"] = objects;
  const Eigen::Matrix3d R = scene.table.pose.linear();
  j["table_frame"] = {
      {"translation", vec_json(scene.table.pose.translation())},
      {"rotation", {{R(0, 0), R(0, 1), R(0, 2)}, {R(1, 0), R(1, 1), R(1, 2)}, {R(2, 0), R(2, 1), R(2, 2)}}},
      {"origin", {scene.table.origin.x(), scene.table.origin.y()}},
      {"size", {scene.table.size.x(), scene.table.size.y()}},
  };
  j["box_position"] = vec_json(scene.box_position);
  nlohmann::json obstacles = nlohmann::json::array();
  for (const Vec3& o : scene.obstacles) obstacles.push_back(vec_json(o));
  j["obstacles"] = obstacles;
}

void from_json(const nlohmann::json& j, Scene& scene) {
  try {
    scene = Scene{};
    for (const auto& o : j.at("objects")) {
      SceneObject obj;
      obj.id = o.at("id").get<int>();
      obj.position = json_vec3(o.at("position"));
      obj.extent = o.value("extent", 0.05);
      obj.confidence = o.value("confidence", 1.0);
      scene.objects.push_back(obj);
    }
    if (j.contains("table_frame")) {
      const auto& t = j.at("table_frame");
      scene.table.pose = Eigen::Isometry3d::Identity();
      scene.table.pose.translation() = json_vec3(t.at("translation"));
      const auto& R = t.at("rotation");
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) scene.table.pose.linear()(r, c) = R.at(r).at(c).get<double>();
      }
      scene.table.origin = Vec2(t.at("origin")[0].get<double>(), t.at("origin")[1].get<double>());
      scene.table.size = Vec2(t.at("size")[0].get<double>(), t.at("size")[1].get<double>());
    }
    if (j.contains("box_position")) scene.box_position = json_vec3(j.at("box_position"));
    if (j.contains("obstacles")) {
      for (const auto& o : j.at("obstacles")) scene.obstacles.push_back(json_vec3(o));
    } else {
      scene.obstacles = {scene.box_position};
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parameter, std::string("malformed scene: ") + e.what());
  }
  scene.validate();
}

}  // namespace reachabc
