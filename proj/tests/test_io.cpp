#include <catch2/catch_amalgamated.hpp>
#include <filesystem>

#include "twinforge/io.hpp"
#include "twinforge/rng.hpp"

using namespace twinforge;

namespace {

std::filesystem::path temp_dir() {
  auto dir = std::filesystem::temp_directory_path() / "twinforge_io_test";
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("apc round trip with labels") {
  Rng rng(1);
  PointCloud cloud;
  cloud.labels = std::vector<int>{};
  for (int i = 0; i < 37; ++i) {
    cloud.points.push_back({rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)});
    cloud.labels->push_back(static_cast<int>(rng.below(4)));
  }
  const PointCloud parsed = parse_apc(write_apc(cloud));
  REQUIRE(parsed.size() == cloud.size());
  REQUIRE(parsed.labels.has_value());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    CHECK((parsed.points[i] - cloud.points[i]).norm() == 0.0);
    CHECK((*parsed.labels)[i] == (*cloud.labels)[i]);
  }
}

TEST_CASE("apc header is strict") {
  CHECK_THROWS_AS(parse_apc("# apcx v1 n=1 labeled=0\n0 0 0\n"), Error);
  CHECK_THROWS_AS(parse_apc("# apc v1 n=2 labeled=0\n0 0 0\n"), Error);
  CHECK_THROWS_AS(parse_apc("# apc v1 n=1 labeled=1\n0 0 0\n"), Error);
  const PointCloud ok = parse_apc("# apc v1 n=1 labeled=0\n0.5 -1 2\n");
  CHECK(ok.points[0] == Point3{0.5, -1, 2});
  CHECK_FALSE(ok.labels.has_value());
}

TEST_CASE("depth pgm round trip quantizes to millimeters") {
  const auto dir = temp_dir();
  DepthMap depth = DepthMap::invalid_filled(5, 4);
  depth.at(0, 0) = 1.234;
  depth.at(4, 3) = 0.001;
  depth.at(2, 2) = 3.0005;  // rounds to 3001 mm
  const auto path = (dir / "depth.pgm").string();
  save_depth_pgm(path, depth);
  const DepthMap loaded = load_depth_pgm(path);
  REQUIRE(loaded.width == 5);
  REQUIRE(loaded.height == 4);
  CHECK(loaded.at(0, 0) == Catch::Approx(1.234).margin(5e-4));
  CHECK(loaded.at(4, 3) == Catch::Approx(0.001).margin(5e-4));
  CHECK(loaded.at(2, 2) == Catch::Approx(3.001).margin(5e-4));
  CHECK(loaded.at(1, 1) == 0.0);
}

TEST_CASE("mask pbm round trip") {
  const auto dir = temp_dir();
  Mask mask = Mask::empty(13, 7);  // width not divisible by 8
  Rng rng(5);
  for (int v = 0; v < mask.height; ++v)
    for (int u = 0; u < mask.width; ++u) mask.set(u, v, rng.uniform() < 0.4);
  const auto path = (dir / "mask.pbm").string();
  save_mask_pbm(path, mask);
  const Mask loaded = load_mask_pbm(path);
  REQUIRE(loaded.width == mask.width);
  REQUIRE(loaded.height == mask.height);
  CHECK(loaded.bits == mask.bits);
}

TEST_CASE("camera json round trip") {
  const auto dir = temp_dir();
  CameraIntrinsics intr{612.5, 610.25, 320.125, 241.5, 640, 480};
  RigidTransform pose = RigidTransform::about_axis(Eigen::Vector3d(1, 1, 0).normalized(), 0.7);
  pose.translation = {0.2, -0.1, 0.9};
  const CameraExtrinsics extr = CameraExtrinsics::from_pose(pose);
  const auto path = (dir / "cam.json").string();
  save_camera(path, intr, extr);
  const CameraFile loaded = load_camera(path);
  CHECK(loaded.intrinsics.fx == intr.fx);
  CHECK(loaded.intrinsics.cy == intr.cy);
  CHECK((loaded.extrinsics.matrix - extr.matrix).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("camera json validation") {
  nlohmann::json doc = camera_to_json({600, 600, 320, 240, 640, 480}, {});
  doc["fx"] = -1.0;
  CHECK_THROWS_AS(camera_from_json(doc), Error);
  nlohmann::json missing = camera_to_json({600, 600, 320, 240, 640, 480}, {});
  missing.erase("H");
  CHECK_THROWS_AS(camera_from_json(missing), Error);
}

TEST_CASE("off mesh round trip") {
  TriMesh mesh;
  mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  mesh.triangles = {{0, 1, 2}, {0, 1, 3}, {1, 2, 3}, {0, 2, 3}};
  const TriMesh parsed = parse_off(write_off(mesh));
  REQUIRE(parsed.vertices.size() == 4);
  REQUIRE(parsed.triangles.size() == 4);
  CHECK(parsed.vertices[3] == Point3{0, 0, 1});
  CHECK(parsed.triangles[2] == std::array<int, 3>{1, 2, 3});
}

TEST_CASE("off mesh rejects malformed input") {
  CHECK_THROWS_AS(parse_off("OFX\n1 0 0\n0 0 0\n"), Error);
  CHECK_THROWS_AS(parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n4 0 1 2 0\n"), Error);
  CHECK_THROWS_AS(parse_off("OFF\n2 1 0\n0 0 0\n1 0 0\n3 0 1 2\n"), Error);
}
