#include <catch2/catch_amalgamated.hpp>

#include "twinforge/segmentation.hpp"
#include "twinforge/synthgen.hpp"

using namespace twinforge;

namespace {

PointCloud grid_box(const Point3& lo, const Point3& hi, double step) {
  PointCloud cloud;
  for (double x = lo.x(); x <= hi.x() + 1e-12; x += step)
    for (double y = lo.y(); y <= hi.y() + 1e-12; y += step)
      for (double z = lo.z(); z <= hi.z() + 1e-12; z += step)
        cloud.points.push_back({x, y, z});
  return cloud;
}

PointCloud merge(const std::vector<PointCloud>& clouds) {
  PointCloud out;
  for (const PointCloud& c : clouds)
    out.points.insert(out.points.end(), c.points.begin(), c.points.end());
  return out;
}

std::vector<std::vector<SubPart>> scene_subparts(const Scene& scene) {
  std::vector<std::vector<SubPart>> all;
  for (const SceneFrame& frame : scene.frames) {
    std::vector<SubPart> parts;
    for (std::size_t s = 0; s < frame.subparts.size(); ++s)
      parts.push_back({static_cast<int>(s), frame.subparts[s]});
    all.push_back(parts);
  }
  return all;
}

double label_accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i)
    if (predicted[i] == truth[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

}  // namespace

TEST_CASE("clustering separates two distant boxes") {
  const PointCloud a = grid_box({0, 0, 0}, {0.05, 0.05, 0.05}, 0.01);
  PointCloud b = grid_box({0.15, 0, 0}, {0.2, 0.05, 0.05}, 0.01);
  const PointCloud both = merge({a, b});
  const auto subparts = cluster_subparts(both, 0.02);
  CHECK(subparts.size() == 2);
  CHECK(subparts[0].point_indices.size() == a.size());
  CHECK(subparts[1].point_indices.size() == b.size());
}

TEST_CASE("clustering keeps a dense box together") {
  const PointCloud box = grid_box({0, 0, 0}, {0.1, 0.1, 0.1}, 0.01);
  const auto subparts = cluster_subparts(box, 0.02);
  CHECK(subparts.size() == 1);
}

TEST_CASE("clustering the synthgen cabinet yields at least the true part count") {
  SceneRecipe recipe;
  recipe.category = SceneCategory::Cabinet;
  recipe.seed = 12;
  recipe.sample_spacing = 0.005;
  const Scene scene = generate_scene(recipe);
  const auto subparts = cluster_subparts(scene.frames.back().cloud, 0.015);
  CHECK(subparts.size() >= scene.truth.parts.size());
  // every cluster is pure: all points share a true part label
  for (const SubPart& part : subparts) {
    const int label = (*scene.frames.back().cloud.labels)[part.point_indices.front()];
    for (std::size_t idx : part.point_indices)
      REQUIRE((*scene.frames.back().cloud.labels)[idx] == label);
  }
}

TEST_CASE("subpart graph edges follow proximity") {
  const PointCloud a = grid_box({0, 0, 0}, {0.05, 0.02, 0.02}, 0.01);
  const PointCloud b = grid_box({0.06, 0, 0}, {0.11, 0.02, 0.02}, 0.01);
  const PointCloud c = grid_box({0.12, 0, 0}, {0.17, 0.02, 0.02}, 0.01);
  const PointCloud far = grid_box({0.5, 0, 0}, {0.55, 0.02, 0.02}, 0.01);
  const PointCloud cloud = merge({a, b, c, far});
  std::vector<SubPart> subparts(4);
  std::size_t cursor = 0;
  const std::array<std::size_t, 4> sizes{a.size(), b.size(), c.size(), far.size()};
  for (int s = 0; s < 4; ++s) {
    subparts[static_cast<std::size_t>(s)].id = s;
    for (std::size_t i = 0; i < sizes[static_cast<std::size_t>(s)]; ++i)
      subparts[static_cast<std::size_t>(s)].point_indices.push_back(cursor++);
  }
  const SubPartGraph graph = build_subpart_graph(cloud, subparts, 0.015);
  REQUIRE(graph.edges.size() == 2);
  CHECK(graph.edges[0] == std::pair<int, int>{0, 1});
  CHECK(graph.edges[1] == std::pair<int, int>{1, 2});
  for (const auto& [x, y] : graph.edges) CHECK(x != y);
}

TEST_CASE("closest subpart picks the sub-part holding the nearest point") {
  const PointCloud a = grid_box({0, 0, 0}, {0.02, 0.02, 0.02}, 0.01);
  const PointCloud b = grid_box({0.2, 0, 0}, {0.22, 0.02, 0.02}, 0.01);
  const PointCloud cloud = merge({a, b});
  std::vector<SubPart> subparts(2);
  subparts[0].id = 0;
  subparts[1].id = 1;
  for (std::size_t i = 0; i < a.size(); ++i) subparts[0].point_indices.push_back(i);
  for (std::size_t i = 0; i < b.size(); ++i) subparts[1].point_indices.push_back(a.size() + i);
  CHECK(closest_subpart(subparts, cloud, {0.21, 0.01, 0.01}) == 1);
  CHECK(closest_subpart(subparts, cloud, {-0.1, 0, 0}) == 0);
  // equidistant contact: lowest id wins
  CHECK(closest_subpart(subparts, cloud, {0.11, 0.01, 0.01}) == 0);
}

TEST_CASE("ks statistic basics") {
  std::vector<double> same{0.1, 0.2, 0.3, 0.4};
  CHECK(ks_statistic(same, same) == 0.0);
  std::vector<double> low{0.0, 0.1, 0.2};
  std::vector<double> high{1.0, 1.1, 1.2};
  CHECK(ks_statistic(low, high) == 1.0);
}

TEST_CASE("is_moved distinguishes moved and stationary parts") {
  const PointCloud body = grid_box({0, 0, 0}, {0.2, 0.2, 0.02}, 0.008);
  const PointCloud panel = grid_box({0.3, 0, 0}, {0.32, 0.2, 0.2}, 0.008);
  PointCloud panel_moved = panel;
  for (Point3& p : panel_moved.points) p.x() += 0.05;

  const PointCloud prev = merge({body, panel});
  const PointCloud cur = merge({body, panel_moved});
  MovedCriterion crit;

  const MovedResult stationary = is_moved(body, prev, cur, crit);
  CHECK_FALSE(stationary.moved);
  double mean_fwd = 0;
  for (double d : stationary.forward) mean_fwd += d;
  CHECK(mean_fwd / static_cast<double>(stationary.forward.size()) < 1e-9);

  const MovedResult moved = is_moved(panel_moved, prev, cur, crit);
  CHECK(moved.moved);

  // identical frames: nothing moves
  const MovedResult still = is_moved(panel, prev, prev, crit);
  CHECK_FALSE(still.moved);
}

TEST_CASE("enlarging the distance threshold never flags more sub-parts") {
  SceneRecipe recipe;
  recipe.category = SceneCategory::Drawer;
  recipe.seed = 21;
  recipe.noise_sigma = 0.003;
  const Scene scene = generate_scene(recipe);
  const auto& prev = scene.frames[0].cloud;
  const auto& cur = scene.frames[1].cloud;
  MovedCriterion tight;
  tight.distance_threshold = 0.005;
  MovedCriterion loose;
  loose.distance_threshold = 0.05;
  for (const auto& indices : scene.frames[1].subparts) {
    PointCloud sub;
    for (std::size_t idx : indices) sub.points.push_back(cur.points[idx]);
    const bool moved_tight = is_moved(sub, prev, cur, tight).moved;
    const bool moved_loose = is_moved(sub, prev, cur, loose).moved;
    if (moved_loose) CHECK(moved_tight);
  }
}

TEST_CASE("drawer segmentation reaches oracle accuracy") {
  SceneRecipe recipe;
  recipe.category = SceneCategory::Drawer;
  recipe.seed = 31;
  recipe.sample_spacing = 0.008;
  const Scene scene = generate_scene(recipe);
  std::vector<PointCloud> frames;
  for (const auto& f : scene.frames) frames.push_back(f.cloud);
  const SegmentationResult result =
      segment_movable_parts(frames, scene_subparts(scene), scene.contacts, MovedCriterion{});
  const double acc = label_accuracy(result.final_labels.labels, *frames.back().labels);
  CHECK(acc >= 0.99);
}

TEST_CASE("two door cabinet segmentation labels both doors") {
  SceneRecipe recipe;
  recipe.category = SceneCategory::TwoDoorCabinet;
  recipe.seed = 32;
  recipe.sample_spacing = 0.01;
  const Scene scene = generate_scene(recipe);
  std::vector<PointCloud> frames;
  for (const auto& f : scene.frames) frames.push_back(f.cloud);
  const SegmentationResult result =
      segment_movable_parts(frames, scene_subparts(scene), scene.contacts, MovedCriterion{});
  const auto& truth = *frames.back().labels;
  for (int label = 0; label <= 2; ++label) {
    std::size_t total = 0, hit = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (truth[i] != label) continue;
      ++total;
      if (result.final_labels.labels[i] == label) ++hit;
    }
    REQUIRE(total > 0);
    CHECK(static_cast<double>(hit) / static_cast<double>(total) >= 0.99);
  }
}

TEST_CASE("no motion keeps previous labels") {
  SceneRecipe recipe;
  recipe.category = SceneCategory::Drawer;
  recipe.seed = 33;
  recipe.sample_spacing = 0.012;
  // frame 1 identical to frame 0: the drawer never moves
  recipe.frame_states = {JointState::zeros(1), JointState::zeros(1)};
  const Scene scene = generate_scene(recipe);
  std::vector<PointCloud> frames;
  for (const auto& f : scene.frames) frames.push_back(f.cloud);
  const SegmentationResult result =
      segment_movable_parts(frames, scene_subparts(scene), scene.contacts, MovedCriterion{});
  for (int label : result.final_labels.labels) CHECK(label == 0);
}

TEST_CASE("labels are invariant to a global rigid motion") {
  SceneRecipe recipe;
  recipe.category = SceneCategory::Laptop;
  recipe.seed = 34;
  recipe.sample_spacing = 0.01;
  const Scene scene = generate_scene(recipe);
  std::vector<PointCloud> frames;
  for (const auto& f : scene.frames) frames.push_back(f.cloud);
  const auto subparts = scene_subparts(scene);
  const SegmentationResult base =
      segment_movable_parts(frames, subparts, scene.contacts, MovedCriterion{});

  RigidTransform motion = RigidTransform::about_axis(Eigen::Vector3d(0.3, -0.2, 1).normalized(), 0.8);
  motion.translation = {0.5, -1.2, 0.3};
  std::vector<PointCloud> moved_frames = frames;
  for (PointCloud& frame : moved_frames)
    for (Point3& p : frame.points) p = motion.apply(p);
  std::vector<Point3> moved_contacts;
  for (const Point3& c : scene.contacts) moved_contacts.push_back(motion.apply(c));
  const SegmentationResult moved =
      segment_movable_parts(moved_frames, subparts, moved_contacts, MovedCriterion{});
  CHECK(moved.final_labels.labels == base.final_labels.labels);
}

TEST_CASE("label regions are unions of whole sub-parts") {
  SceneRecipe recipe;
  recipe.category = SceneCategory::Cabinet;
  recipe.seed = 35;
  recipe.sample_spacing = 0.012;
  const Scene scene = generate_scene(recipe);
  std::vector<PointCloud> frames;
  for (const auto& f : scene.frames) frames.push_back(f.cloud);
  const SegmentationResult result =
      segment_movable_parts(frames, scene_subparts(scene), scene.contacts, MovedCriterion{});
  const int k = static_cast<int>(frames.size()) - 1;
  for (const auto& indices : scene.frames.back().subparts) {
    bool any = false, all = true;
    for (std::size_t idx : indices) {
      const bool is_k = result.final_labels.labels[idx] == k;
      any = any || is_k;
      all = all && is_k;
    }
    CHECK(any == all);
  }
}

TEST_CASE("segmentation validates input sizes") {
  SceneRecipe recipe;
  recipe.category = SceneCategory::Drawer;
  recipe.seed = 36;
  recipe.sample_spacing = 0.015;
  const Scene scene = generate_scene(recipe);
  std::vector<PointCloud> frames;
  for (const auto& f : scene.frames) frames.push_back(f.cloud);
  const auto subparts = scene_subparts(scene);
  CHECK_THROWS_AS(segment_movable_parts(frames, subparts, {}, MovedCriterion{}), Error);
}
