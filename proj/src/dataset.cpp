#include "reachabc/dataset.hpp"

#include "reachabc/codec.hpp"

#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

namespace reachabc {

std::span<const float> TrajectoryDataset::record_points(std::size_t i) const {
  const std::size_t stride = 3 * points_per_trajectory;
  return std::span<const float>(points).subspan(i * stride, stride);
}

Vec3 TrajectoryDataset::target(std::size_t i) const {
  return Vec3(targets[3 * i], targets[3 * i + 1], targets[3 * i + 2]);
}

Trajectory TrajectoryDataset::trajectory(std::size_t i) const {
  Trajectory t;
  t.dt = dt;
  const auto p = record_points(i);
  for (std::size_t k = 0; k < points_per_trajectory; ++k) t.points.emplace_back(p[3 * k], p[3 * k + 1], p[3 * k + 2]);
  return t;
}

void TrajectoryDataset::append(const Vec3& target, const Trajectory& trajectory) {
  if (trajectory.size() != points_per_trajectory) {
    throw Error(ErrorCode::shape_mismatch, "trajectory length does not match the dataset");
  }
  for (int a = 0; a < 3; ++a) targets.push_back(static_cast<float>(target[a]));
  for (const Vec3& p : trajectory.points) {
    for (int a = 0; a < 3; ++a) points.push_back(static_cast<float>(p[a]));
  }
}

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {char(v & 0xFF), char((v >> 8) & 0xFF), char((v >> 16) & 0xFF), char((v >> 24) & 0xFF)};
  os.write(b, 4);
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}

void put_f32s(std::ostream& os, std::span<const float> v) {
  const auto bytes = codec::pack_f32(v);
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

void write_itrj(const std::filesystem::path& path, const TrajectoryDataset& data) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorCode::io, "cannot open " + path.string() + " for writing");
  os.write("ITRJ", 4);
  put_u32(os, kDatasetVersion);
  put_u32(os, static_cast<std::uint32_t>(data.count()));
  put_u32(os, data.points_per_trajectory);
  put_f32s(os, std::span<const float>(&data.dt, 1));
  for (std::size_t i = 0; i < data.count(); ++i) {
    put_f32s(os, std::span<const float>(data.targets).subspan(3 * i, 3));
    put_f32s(os, data.record_points(i));
  }
  if (!os) throw Error(ErrorCode::io, "failed writing " + path.string());
}

TrajectoryDataset read_itrj(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  constexpr std::size_t kHeader = 20;
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "ITRJ", 4) != 0) {
    throw Error(ErrorCode::bad_magic, path.string() + " is not an ITRJ dataset");
  }
  if (bytes.size() < kHeader) throw Error(ErrorCode::truncated, "ITRJ header truncated");
  const std::uint32_t version = get_u32(bytes.data() + 4);
  if (version != kDatasetVersion) {
    throw Error(ErrorCode::shape_mismatch, "unsupported ITRJ version " + std::to_string(version));
  }
  TrajectoryDataset data;
  const std::uint32_t count = get_u32(bytes.data() + 8);
  data.points_per_trajectory = get_u32(bytes.data() + 12);
  data.dt = codec::unpack_f32(std::span<const std::uint8_t>(bytes).subspan(16, 4)).front();
  const std::size_t record_floats = 3 + 3 * std::size_t(data.points_per_trajectory);
  const std::size_t expected = kHeader + std::size_t(count) * record_floats * 4;
  if (bytes.size() < expected) {
    throw Error(ErrorCode::truncated, "ITRJ body truncated: expected " + std::to_string(expected) +
                                          " bytes, have " + std::to_string(bytes.size()));
  }
  const auto body = codec::unpack_f32(std::span<const std::uint8_t>(bytes).subspan(kHeader, expected - kHeader));
  data.targets.reserve(3 * std::size_t(count));
  data.points.reserve(std::size_t(count) * (record_floats - 3));
  for (std::size_t i = 0; i < count; ++i) {
    const float* rec = body.data() + i * record_floats;
    data.targets.insert(data.targets.end(), rec, rec + 3);
    data.points.insert(data.points.end(), rec + 3, rec + record_floats);
  }
  return data;
}

void write_jsonl(const std::filesystem::path& path, const TrajectoryDataset& data) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error(ErrorCode::io, "cannot open " + path.string() + " for writing");
  for (std::size_t i = 0; i < data.count(); ++i) {
    nlohmann::json line;
    line["target"] = {data.targets[3 * i], data.targets[3 * i + 1], data.targets[3 * i + 2]};
    nlohmann::json pts = nlohmann::json::array();
    const auto p = data.record_points(i);
    for (std::size_t k = 0; k < data.points_per_trajectory; ++k) pts.push_back({p[3 * k], p[3 * k + 1], p[3 * k + 2]});
    line["points"] = std::move(pts);
    os << line.dump() << '\n';
  }
}

TrajectoryDataset read_jsonl(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::io, "cannot open " + path.string());
  TrajectoryDataset data;
  bool first = true;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto& pts = j.at("points");
      if (first) {
        data.points_per_trajectory = static_cast<std::uint32_t>(pts.size());
        first = false;
      } else if (pts.size() != data.points_per_trajectory) {
        throw Error(ErrorCode::shape_mismatch, "JSONL records have differing lengths");
      }
      for (int a = 0; a < 3; ++a) data.targets.push_back(j.at("target").at(a).get<float>());
      for (const auto& p : pts) {
        for (int a = 0; a < 3; ++a) data.points.push_back(p.at(a).get<float>());
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::parameter, std::string("malformed JSONL record: ") + e.what());
    }
  }
  return data;
}

std::vector<Vec3> sample_workspace_targets(const Scene& scene, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const TableFrame& t = scene.table;
  std::uniform_real_distribution<double> ux(t.origin.x(), t.origin.x() + t.size.x());
  std::uniform_real_distribution<double> uy(t.origin.y(), t.origin.y() + t.size.y());
  std::vector<Vec3> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double x = ux(rng);
    const double y = uy(rng);
    out.push_back(t.to_world(Vec2(x, y)));
  }
  return out;
}

TrajectoryDataset generate_dataset(const ArmModel& model, const ControllerGains& gains, const Scene& scene,
                                   const DatasetRecipe& recipe) {
  TrajectoryDataset data;
  data.points_per_trajectory = static_cast<std::uint32_t>(gains.horizon);
  data.dt = static_cast<float>(gains.dt);
  const auto targets = sample_workspace_targets(scene, recipe.count, recipe.seed);
  const JointVector start = start_posture(model);
  data.targets.reserve(3 * targets.size());
  data.points.reserve(targets.size() * 3 * gains.horizon);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    try {
      data.append(targets[i], generate(model, gains, scene, start, targets[i]));
    } catch (const Error& e) {
      throw Error(e.code(), "dataset record " + std::to_string(i) + ": " + e.what());
    }
  }
  return data;
}

nlohmann::json dataset_metadata(const ArmModel& model, const ControllerGains& gains, const Scene& scene,
                                const DatasetRecipe& recipe) {
  nlohmann::json j;
  j["count"] = recipe.count;
  j["seed"] = recipe.seed;
  j["arm_model"] = model;
  const JointVector start = start_posture(model);
  j["start_theta"] = std::vector<double>(start.data(), start.data() + start.size());
  j["gains"] = {{"k_p", gains.k_p},       {"k_i", gains.k_i},
                {"k_d", gains.k_d},       {"k_rep", gains.k_rep},
                {"dt", gains.dt},         {"horizon", gains.horizon},
                {"substeps", gains.substeps}, {"damping", gains.damping},
                {"integral_limit", gains.integral_limit}, {"repulsion_cutoff", gains.repulsion_cutoff}};
  j["scene"] = scene;
  return j;
}

}  // namespace reachabc
