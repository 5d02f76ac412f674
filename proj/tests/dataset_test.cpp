#include "reachabc/codec.hpp"
#include "reachabc/dataset.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

namespace reachabc {
namespace {

namespace fs = std::filesystem;

std::string file_hash(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return codec::sha256_hex(bytes);
}

TrajectoryDataset small(std::size_t count, std::uint64_t seed) {
  DatasetRecipe recipe;
  recipe.count = count;
  recipe.seed = seed;
  return generate_dataset(ArmModel::standard(), ControllerGains{}, default_scene(), recipe);
}

TEST(Codec, Base64KnownVectors) {
  const std::string text = "foobar";
  const std::vector<std::uint8_t> bytes(text.begin(), text.end());
  EXPECT_EQ(codec::base64_encode(bytes), "Zm9vYmFy");
  EXPECT_EQ(codec::base64_encode(std::span(bytes).first(4)), "Zm9vYg==");
  EXPECT_EQ(codec::base64_decode("Zm9vYg=="), std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 4));
  EXPECT_THROW(codec::base64_decode("Zm9v*g=="), Error);
}

TEST(Codec, Sha256KnownVector) {
  const std::string text = "abc";
  EXPECT_EQ(codec::sha256_hex(std::vector<std::uint8_t>(text.begin(), text.end())),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Codec, F32LittleEndian) {
  const std::vector<float> v{1.0f};
  EXPECT_EQ(codec::pack_f32(v), (std::vector<std::uint8_t>{0x00, 0x00, 0x80, 0x3f}));
  EXPECT_EQ(codec::unpack_f32(codec::pack_f32(v)), v);
}

TEST(Dataset, TenRecordsRoundTrip) {
  const auto data = small(10, 1);
  const auto path = fs::temp_directory_path() / "reachabc_ten.itrj";
  write_itrj(path, data);
  EXPECT_EQ(fs::file_size(path), 4 + 4 + 4 + 4 + 4 + 10 * (3 + 270) * 4u);
  const auto back = read_itrj(path);
  EXPECT_EQ(back.count(), 10u);
  EXPECT_EQ(back.targets, data.targets);
  EXPECT_EQ(back.points, data.points);
  fs::remove(path);
}

TEST(Dataset, SameSeedSameFile) {
  const auto a = fs::temp_directory_path() / "reachabc_a.itrj";
  const auto b = fs::temp_directory_path() / "reachabc_b.itrj";
  write_itrj(a, small(25, 9));
  write_itrj(b, small(25, 9));
  EXPECT_EQ(file_hash(a), file_hash(b));
  write_itrj(b, small(25, 10));
  EXPECT_NE(file_hash(a), file_hash(b));
  fs::remove(a);
  fs::remove(b);
}

TEST(Dataset, JsonlRoundTrip) {
  const auto data = small(5, 2);
  const auto path = fs::temp_directory_path() / "reachabc.jsonl";
  write_jsonl(path, data);
  const auto back = read_jsonl(path);
  EXPECT_EQ(back.targets, data.targets);
  EXPECT_EQ(back.points, data.points);
  fs::remove(path);
}

TEST(Dataset, TargetsOnTableInsideWorkspace) {
  const Scene scene = default_scene();
  for (const Vec3& t : sample_workspace_targets(scene, 500, 4)) {
    EXPECT_EQ(t.z(), 0.0);
    EXPECT_TRUE(scene.table.contains(scene.table.to_plane(t), 0.0));
  }
}

TEST(Dataset, RecordMatchesSimulator) {
  const auto data = small(3, 5);
  const ArmModel model = ArmModel::standard();
  for (std::size_t i = 0; i < data.count(); ++i) {
    const Trajectory t = generate(model, ControllerGains{}, default_scene(), start_posture(model), data.target(i));
    const Trajectory r = data.trajectory(i);
    for (std::size_t k = 0; k < t.size(); ++k) EXPECT_LE((t[k] - r[k]).norm(), 1e-6);
  }
}

TEST(Dataset, BadMagicAndTruncation) {
  const auto path = fs::temp_directory_path() / "reachabc_bad.itrj";
  write_itrj(path, small(4, 1));
  fs::resize_file(path, fs::file_size(path) - 7);
  try {
    read_itrj(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::truncated);
  }
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.write("XTRJ", 4);
  }
  try {
    read_itrj(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::bad_magic);
  }
  fs::remove(path);
  EXPECT_THROW(read_itrj(path), Error);
}

TEST(Dataset, MetadataRecordsStartPosture) {
  const ArmModel model = ArmModel::standard();
  const auto meta = dataset_metadata(model, ControllerGains{}, default_scene(), DatasetRecipe{});
  ASSERT_TRUE(meta.contains("start_theta"));
  EXPECT_EQ(meta["start_theta"].size(), 9u);
  EXPECT_DOUBLE_EQ(meta["start_theta"][6].get<double>(), model.theta_sec[6]);
}

}  // namespace
}  // namespace reachabc
