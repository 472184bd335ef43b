#include <catch2/catch_amalgamated.hpp>

#include "twinforge/kinfit.hpp"
#include "twinforge/rng.hpp"
#include "twinforge/synthgen.hpp"

using namespace twinforge;

namespace {

PointCloud random_cloud(Rng& rng, std::size_t n, double extent = 0.3) {
  PointCloud cloud;
  for (std::size_t i = 0; i < n; ++i)
    cloud.points.push_back(
        {rng.uniform(-extent, extent), rng.uniform(-extent, extent), rng.uniform(-extent, extent)});
  return cloud;
}

double axis_angle_error(const Eigen::Vector3d& estimated, const Eigen::Vector3d& truth) {
  const double c = std::clamp(std::abs(estimated.normalized().dot(truth.normalized())), 0.0, 1.0);
  return std::acos(c);
}

double point_to_axis_distance(const Point3& p, const Point3& axis_point,
                              const Eigen::Vector3d& axis) {
  const Eigen::Vector3d rel = p - axis_point;
  return (rel - rel.dot(axis) * axis).norm();
}

std::vector<PointCloud> scene_part_frames(const Scene& scene, int part_id) {
  std::vector<PointCloud> frames;
  for (const auto& f : scene.frames) frames.push_back(f.cloud);
  return extract_part_frames(frames, *scene.frames.back().cloud.labels, part_id);
}

}  // namespace

TEST_CASE("estimate_part_transform on identical clouds is the identity") {
  Rng rng(1);
  const PointCloud cloud = random_cloud(rng, 60);
  const IcpResult result = estimate_part_transform(cloud, cloud);
  CHECK(result.converged);
  CHECK((result.transform.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(result.transform.translation.norm() < 1e-9);
}

TEST_CASE("known rotation about an offset axis with exact correspondences") {
  Rng rng(2);
  const PointCloud prev = random_cloud(rng, 80);
  const RigidTransform truth =
      RigidTransform::about_axis(Eigen::Vector3d(0.2, 1, 0.4).normalized(), 20 * M_PI / 180.0,
                                 {0.4, -0.2, 0.6});
  PointCloud cur;
  for (const Point3& p : prev.points) cur.points.push_back(truth.apply(p));
  std::vector<std::pair<std::size_t, std::size_t>> corr;
  for (std::size_t i = 0; i < prev.size(); ++i) corr.emplace_back(i, i);
  const IcpResult result = estimate_part_transform(prev, cur, corr);
  CHECK((result.transform.matrix() - truth.matrix()).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(result.residual < 1e-9);
}

TEST_CASE("icp without correspondences recovers a misaligned part") {
  // drawer front assembly (panel + handle breaks the symmetry), 10 degree
  // true motion, correspondences withheld
  SceneRecipe recipe;
  recipe.category = SceneCategory::Drawer;
  recipe.seed = 3;
  recipe.sample_spacing = 0.006;
  const Scene scene = generate_scene(recipe);
  PointCloud prev;
  for (std::size_t i = 0; i < scene.frames[0].cloud.size(); ++i)
    if ((*scene.frames[0].cloud.labels)[i] == 1)
      prev.points.push_back(scene.frames[0].cloud.points[i]);
  const RigidTransform truth =
      RigidTransform::about_axis(Eigen::Vector3d::UnitZ(), 10 * M_PI / 180.0, {0.2, 0, 0});
  PointCloud cur;
  for (const Point3& p : prev.points) cur.points.push_back(truth.apply(p));
  const IcpResult result = estimate_part_transform(prev, cur);
  const Eigen::AngleAxisd residual(result.transform.rotation.transpose() * truth.rotation);
  CHECK(residual.angle() < 0.5 * M_PI / 180.0);
}

TEST_CASE("screw decomposition handles the identity") {
  const ScrewMotion screw = screw_decompose(RigidTransform::identity());
  CHECK(screw.rotation_angle == 0.0);
  CHECK(screw.translation_along_axis == 0.0);
  CHECK(screw.axis_origin.norm() == 0.0);
}

TEST_CASE("screw decomposition recovers an offset rotation axis") {
  const RigidTransform t =
      RigidTransform::about_axis(Eigen::Vector3d::UnitZ(), 45 * M_PI / 180.0, {1, 2, 0});
  const ScrewMotion screw = screw_decompose(t);
  CHECK(screw.rotation_angle == Catch::Approx(45 * M_PI / 180.0).margin(1e-12));
  CHECK(std::abs(std::abs(screw.rotation_axis.z()) - 1.0) < 1e-12);
  // minimum-norm convention: the z component is zero, xy matches the axis point
  const double sign = screw.rotation_axis.z() > 0 ? 1.0 : -1.0;
  (void)sign;
  CHECK(screw.axis_origin.x() == Catch::Approx(1.0).margin(1e-9));
  CHECK(screw.axis_origin.y() == Catch::Approx(2.0).margin(1e-9));
  CHECK(std::abs(screw.axis_origin.z()) < 1e-9);
}

TEST_CASE("screw decomposition of a pure translation") {
  const RigidTransform t = RigidTransform::from_translation({0, 0, 0.07});
  const ScrewMotion screw = screw_decompose(t);
  CHECK(screw.rotation_angle == 0.0);
  CHECK((screw.rotation_axis - Eigen::Vector3d::UnitZ()).norm() < 1e-12);
  CHECK(screw.translation_along_axis == Catch::Approx(0.07).margin(1e-12));
}

TEST_CASE("screw decompose then compose round trips") {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Vector3d axis =
        Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()).normalized();
    RigidTransform t = RigidTransform::about_axis(axis, rng.uniform(0.01, 3.0),
                                                  {rng.uniform(-1, 1), rng.uniform(-1, 1),
                                                   rng.uniform(-1, 1)});
    t.translation += rng.uniform(-0.5, 0.5) * axis;
    const RigidTransform back = screw_compose(screw_decompose(t));
    CHECK((back.matrix() - t.matrix()).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("joint classification thresholds") {
  // 30 degree door swing
  const ScrewMotion door = screw_decompose(
      RigidTransform::about_axis(Eigen::Vector3d::UnitZ(), 30 * M_PI / 180.0, {0.5, 0, 0}));
  CHECK(classify_joint(door) == JointKind::Revolute);

  // 8 cm slide with 0.1 degree parasitic rotation
  RigidTransform slide = RigidTransform::about_axis(Eigen::Vector3d::UnitY(), 0.1 * M_PI / 180.0);
  slide.translation += Eigen::Vector3d{0.08, 0, 0};
  CHECK(classify_joint(screw_decompose(slide)) == JointKind::Prismatic);

  // 1 mm slide at 0.05 degrees: below both floors
  RigidTransform tiny = RigidTransform::about_axis(Eigen::Vector3d::UnitY(), 0.05 * M_PI / 180.0);
  tiny.translation += Eigen::Vector3d{0.001, 0, 0};
  CHECK_THROWS_AS(classify_joint(screw_decompose(tiny)), Error);
}

TEST_CASE("classification ignores translation magnitude for revolute motions") {
  for (double radius : {0.05, 0.5, 5.0}) {
    const ScrewMotion screw = screw_decompose(
        RigidTransform::about_axis(Eigen::Vector3d::UnitZ(), 0.4, {radius, 0, 0}));
    CHECK(classify_joint(screw) == JointKind::Revolute);
  }
}

TEST_CASE("laptop joint fit is exact on noiseless frames") {
  SceneRecipe recipe;
  recipe.category = SceneCategory::Laptop;
  recipe.seed = 41;
  recipe.sample_spacing = 0.008;
  const Scene scene = generate_scene(recipe);
  const JointEstimate estimate = fit_joint(scene_part_frames(scene, 1));
  const Joint& truth = *scene.truth.parts[1].joint;
  CHECK(estimate.kind == JointKind::Revolute);
  CHECK(axis_angle_error(estimate.axis, truth.axis) < 0.5 * M_PI / 180.0);
  REQUIRE(estimate.origin.has_value());
  CHECK(point_to_axis_distance(*estimate.origin, truth.origin, truth.axis) < 1e-3);
  CHECK(estimate.residual < 1e-9);
  CHECK(std::abs(std::abs(estimate.displacement.back()) -
                 scene.frame_states.back().values[0]) < 1e-9);
}

TEST_CASE("drawer joint fit recovers the commanded slide") {
  SceneRecipe recipe;
  recipe.category = SceneCategory::Drawer;
  recipe.seed = 42;
  recipe.sample_spacing = 0.008;
  const Scene scene = generate_scene(recipe);
  const JointEstimate estimate = fit_joint(scene_part_frames(scene, 1));
  CHECK(estimate.kind == JointKind::Prismatic);
  CHECK_FALSE(estimate.origin.has_value());
  const double commanded = scene.frame_states.back().values[0];
  CHECK(std::abs(std::abs(estimate.displacement.back()) - commanded) < 0.002);
}

TEST_CASE("noisy joint fit stays inside the real-world envelope") {
  // 5 mm point noise; the mean axis error must stay under 9 degrees
  double total_error = 0;
  int runs = 0;
  for (SceneCategory category : {SceneCategory::Laptop, SceneCategory::Drawer}) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      SceneRecipe recipe;
      recipe.category = category;
      recipe.seed = 100 + seed;
      recipe.noise_sigma = 0.005;
      recipe.sample_spacing = 0.01;
      const Scene scene = generate_scene(recipe);
      const JointEstimate estimate = fit_joint(scene_part_frames(scene, 1));
      total_error += axis_angle_error(estimate.axis, scene.truth.parts[1].joint->axis);
      ++runs;
    }
  }
  CHECK(total_error / runs < 9.0 * M_PI / 180.0);
}

TEST_CASE("axis estimates rotate with a global rigid motion") {
  SceneRecipe recipe;
  recipe.category = SceneCategory::Cabinet;
  recipe.seed = 44;
  recipe.sample_spacing = 0.012;
  const Scene scene = generate_scene(recipe);
  const auto base_frames = scene_part_frames(scene, 1);
  const JointEstimate base = fit_joint(base_frames);

  RigidTransform motion = RigidTransform::about_axis(Eigen::Vector3d(1, 2, 3).normalized(), 1.1);
  motion.translation = {0.4, 0.2, -0.6};
  std::vector<PointCloud> moved_frames = base_frames;
  for (PointCloud& frame : moved_frames)
    for (Point3& p : frame.points) p = motion.apply(p);
  const JointEstimate moved = fit_joint(moved_frames);
  CHECK(axis_angle_error(moved.axis, motion.rotation * base.axis) < 1e-9);
}

TEST_CASE("convex hull of a box keeps only the corners") {
  Rng rng(5);
  std::vector<Point3> points;
  for (int corner = 0; corner < 8; ++corner)
    points.push_back({(corner & 1) ? 0.2 : -0.2, (corner & 2) ? 0.1 : -0.1,
                      (corner & 4) ? 0.3 : 0.0});
  // interior chaff
  for (int i = 0; i < 500; ++i)
    points.push_back({rng.uniform(-0.19, 0.19), rng.uniform(-0.09, 0.09),
                      rng.uniform(0.01, 0.29)});
  const TriMesh hull = convex_hull(points);
  CHECK(hull.vertices.size() == 8);
  CHECK(hull.triangles.size() == 12);
}

TEST_CASE("convex hull contains every input point") {
  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Point3> points;
    const std::size_t n = 30 + rng.below(200);
    for (std::size_t i = 0; i < n; ++i)
      points.push_back({rng.normal(), rng.normal(), rng.normal()});
    const TriMesh hull = convex_hull(points);
    const ConvexShape shape(hull);
    for (const Point3& p : points) CHECK(shape.distance(p).signed_distance < 1e-7);
  }
}

TEST_CASE("convex distance signs and closest points") {
  std::vector<Point3> corners;
  for (int corner = 0; corner < 8; ++corner)
    corners.push_back({(corner & 1) ? 0.1 : -0.1, (corner & 2) ? 0.1 : -0.1,
                       (corner & 4) ? 0.1 : -0.1});
  const ConvexShape shape(convex_hull(corners));
  const ConvexDistance outside = shape.distance({0.2, 0, 0});
  CHECK(outside.signed_distance == Catch::Approx(0.1).margin(1e-12));
  CHECK((outside.closest - Point3{0.1, 0, 0}).norm() < 1e-12);
  CHECK((outside.normal - Eigen::Vector3d::UnitX()).norm() < 1e-9);
  const ConvexDistance inside = shape.distance({0.05, 0, 0});
  CHECK(inside.signed_distance == Catch::Approx(-0.05).margin(1e-12));
  const ConvexDistance corner = shape.distance({0.2, 0.2, 0.2});
  CHECK(corner.signed_distance == Catch::Approx(std::sqrt(0.03)).margin(1e-12));
}

TEST_CASE("drawer model builds end to end and reproduces the frames") {
  SceneRecipe recipe;
  recipe.category = SceneCategory::Drawer;
  recipe.seed = 47;
  recipe.sample_spacing = 0.01;
  const Scene scene = generate_scene(recipe);
  std::vector<PointCloud> frames;
  for (const auto& f : scene.frames) frames.push_back(f.cloud);
  const std::vector<int>& labels = *frames.back().labels;

  const JointEstimate estimate = fit_joint(extract_part_frames(frames, labels, 1));
  const ArticulatedModel model =
      build_model(SegmentationLabels{labels}, frames.back(), {estimate});

  // URDF loads
  const ArticulatedModel parsed = from_urdf(to_urdf(model));
  CHECK(parsed.parts.size() == 2);

  // FK at the fitted displacements reproduces each frame's part points (RMS)
  for (std::size_t k = 0; k < frames.size(); ++k) {
    JointState state{{estimate.displacement[k]}};
    const auto poses = forward_kinematics(model, state);
    // model rest frame = final frame un-posed; compare part-1 points
    double sq_sum = 0;
    std::size_t count = 0;
    const RigidTransform unpose = model.parts[1].joint->motion(estimate.displacement.back()).inverse();
    for (std::size_t i = 0; i < frames.back().size(); ++i) {
      if (labels[i] != 1) continue;
      const Point3 rest = unpose.apply(frames.back().points[i]);
      const Point3 predicted = poses[1].apply(rest);
      sq_sum += (predicted - frames[k].points[i]).squaredNorm();
      ++count;
    }
    CHECK(std::sqrt(sq_sum / count) < 0.003);
  }
}

TEST_CASE("fridge model construction recovers two revolute and one prismatic joint") {
  SceneRecipe recipe;
  recipe.category = SceneCategory::Fridge;
  recipe.seed = 48;
  recipe.sample_spacing = 0.015;
  const Scene scene = generate_scene(recipe);
  std::vector<PointCloud> frames;
  for (const auto& f : scene.frames) frames.push_back(f.cloud);
  const std::vector<int>& labels = *frames.back().labels;
  std::vector<JointEstimate> estimates;
  for (int part = 1; part <= 3; ++part)
    estimates.push_back(fit_joint(extract_part_frames(frames, labels, part)));
  const ArticulatedModel model =
      build_model(SegmentationLabels{labels}, frames.back(), estimates);
  REQUIRE(model.parts.size() == 4);
  CHECK(model.parts[1].joint->kind == JointKind::Revolute);
  CHECK(model.parts[2].joint->kind == JointKind::Revolute);
  CHECK(model.parts[3].joint->kind == JointKind::Prismatic);
}

TEST_CASE("zero movable parts gives a single link model") {
  PointCloud cloud;
  Rng rng(9);
  for (int i = 0; i < 200; ++i)
    cloud.points.push_back({rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(0, 0.2)});
  SegmentationLabels labels{std::vector<int>(cloud.size(), 0)};
  const ArticulatedModel model = build_model(labels, cloud, {});
  CHECK(model.parts.size() == 1);
  CHECK(model.movable_count() == 0);
}

TEST_CASE("build_model requires one estimate per label") {
  PointCloud cloud;
  for (int i = 0; i < 10; ++i) cloud.points.push_back({i * 0.01, 0.02 * (i % 3), 0.03 * (i % 2)});
  SegmentationLabels labels{std::vector<int>(cloud.size(), 0)};
  labels.labels[0] = 1;
  CHECK_THROWS_AS(build_model(labels, cloud, {}), Error);
}
