#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "twinforge/geometry.hpp"
#include "twinforge/io.hpp"
#include "twinforge/model.hpp"
#include "twinforge/render.hpp"
#include "twinforge/rng.hpp"

namespace twinforge {

// Ground-truth scene generator: axis-aligned box assemblies with known joints,
// sampled clouds, depth renders, and per-interaction contact points. Every
// quantity is analytically checkable; this is the oracle the test suites and
// the acceptance gate run against.

enum class SceneCategory { Drawer, Laptop, Cabinet, Lamp, TwoDoorCabinet, Fridge };

inline const char* scene_category_name(SceneCategory c) {
  switch (c) {
    case SceneCategory::Drawer: return "drawer";
    case SceneCategory::Laptop: return "laptop";
    case SceneCategory::Cabinet: return "cabinet";
    case SceneCategory::Lamp: return "lamp";
    case SceneCategory::TwoDoorCabinet: return "two_door_cabinet";
    case SceneCategory::Fridge: return "fridge";
  }
  return "unknown";
}

inline SceneCategory scene_category_from_name(const std::string& name) {
  for (SceneCategory c : {SceneCategory::Drawer, SceneCategory::Laptop, SceneCategory::Cabinet,
                          SceneCategory::Lamp, SceneCategory::TwoDoorCabinet, SceneCategory::Fridge})
    if (name == scene_category_name(c)) return c;
  fail("invalid-input", "unknown scene category '" + name + "'");
}

struct SceneRecipe {
  SceneCategory category = SceneCategory::Drawer;
  std::vector<JointState> frame_states;  // K+1 states; defaults used when empty
  double sample_spacing = 0.01;          // surface sampling spacing in meters
  double noise_sigma = 0.0;              // per-axis Gaussian point noise in meters
  std::uint64_t seed = 0;
  CameraIntrinsics intrinsics{580.0, 580.0, 320.0, 240.0, 640, 480};
  Point3 camera_eye{1.25, 0.0, 0.85};
  Point3 camera_target{0.0, 0.0, 0.25};

  void check() const {
    require(sample_spacing > 0, "invalid-input", "sample_spacing must be positive");
    require(noise_sigma >= 0, "invalid-input", "noise sigma must be non-negative");
  }
};

struct SceneFrame {
  PointCloud cloud;  // labels carry true part ids
  DepthMap depth;
  Mask mask;
  std::vector<std::vector<std::size_t>> subparts;  // oracle sub-part proposals
};

struct Scene {
  ArticulatedModel truth;                     // geometry in rest frame, true joints
  std::vector<SceneFrame> frames;             // K+1 frames
  std::vector<Point3> contacts;               // K contact points (frame-k coordinates)
  std::vector<Point3> contact_rest;           // same points in the rest frame, per part 1..K
  CameraIntrinsics intrinsics;
  CameraExtrinsics extrinsics;
  std::vector<JointState> frame_states;
};

// Right-handed camera with +z optical axis and +y image-down.
inline CameraExtrinsics look_at_camera(const Point3& eye, const Point3& target) {
  const Eigen::Vector3d forward = (target - eye).normalized();
  require(std::abs(forward.z()) < 0.999, "invalid-input", "camera cannot look straight down z");
  const Eigen::Vector3d right = forward.cross(Eigen::Vector3d::UnitZ()).normalized();
  const Eigen::Vector3d down = forward.cross(right);
  RigidTransform cam_in_base;
  cam_in_base.rotation.col(0) = right;
  cam_in_base.rotation.col(1) = down;
  cam_in_base.rotation.col(2) = forward;
  cam_in_base.translation = eye;
  return CameraExtrinsics::from_pose(cam_in_base);
}

namespace synth_detail {

inline TriMesh box(const Point3& lo, const Point3& hi) {
  TriMesh mesh;
  for (int corner = 0; corner < 8; ++corner)
    mesh.vertices.push_back({(corner & 1) ? hi.x() : lo.x(), (corner & 2) ? hi.y() : lo.y(),
                             (corner & 4) ? hi.z() : lo.z()});
  // outward-oriented faces
  mesh.triangles = {{0, 2, 1}, {1, 2, 3},   // z = lo
                    {4, 5, 6}, {5, 7, 6},   // z = hi
                    {0, 1, 4}, {1, 5, 4},   // y = lo
                    {2, 6, 3}, {3, 6, 7},   // y = hi
                    {0, 4, 2}, {2, 4, 6},   // x = lo
                    {1, 3, 5}, {3, 7, 5}};  // x = hi
  return mesh;
}

struct PartBlueprint {
  std::vector<TriMesh> pieces;
  std::optional<Joint> joint;
  Point3 contact_rest = Point3::Zero();  // interaction point in rest frame (movable parts)
};

inline Joint make_joint(JointKind kind, const Eigen::Vector3d& axis, const Point3& origin,
                        double lower, double upper) {
  Joint joint;
  joint.kind = kind;
  joint.axis = axis.normalized();
  joint.origin = origin;
  joint.lower = lower;
  joint.upper = upper;
  joint.state = 0.0;
  return joint;
}

struct Blueprint {
  std::vector<PartBlueprint> parts;  // index 0 = root
  std::vector<double> interaction_delta;  // default per-joint motion per frame
};

// Convention: +x faces the robot, +z is up, objects rest on z = 0.
inline Blueprint build_blueprint(SceneCategory category) {
  Blueprint bp;
  const double t = 0.02;  // panel thickness
  switch (category) {
    case SceneCategory::Drawer: {
      PartBlueprint body;
      // open-front shell, outer 0.4 x 0.4 x 0.3
      body.pieces.push_back(box({-0.20, -0.20, 0.00}, {0.20, 0.20, t}));          // bottom
      body.pieces.push_back(box({-0.20, -0.20, 0.30 - t}, {0.20, 0.20, 0.30}));   // top
      body.pieces.push_back(box({-0.20, -0.20, t}, {0.20, -0.20 + t, 0.30 - t})); // left
      body.pieces.push_back(box({-0.20, 0.20 - t, t}, {0.20, 0.20, 0.30 - t}));   // right
      body.pieces.push_back(box({-0.20, -0.20 + t, t}, {-0.20 + t, 0.20 - t, 0.30 - t}));  // back
      PartBlueprint front;
      front.pieces.push_back(box({0.20, -0.19, 0.02}, {0.20 + t, 0.19, 0.28}));  // panel
      front.pieces.push_back(box({0.20 + t, -0.05, 0.13}, {0.25, 0.05, 0.17}));  // handle
      front.joint = make_joint(JointKind::Prismatic, Eigen::Vector3d::UnitX(),
                               {0.21, 0.0, 0.15}, 0.0, 0.16);
      front.contact_rest = {0.25, 0.0, 0.15};  // handle front face center
      bp.parts = {body, front};
      bp.interaction_delta = {0.08};
      break;
    }
    case SceneCategory::Laptop: {
      PartBlueprint base;
      base.pieces.push_back(box({-0.15, -0.11, 0.0}, {0.15, 0.11, t}));
      PartBlueprint lid;
      lid.pieces.push_back(box({-0.15, -0.11, t}, {0.15, 0.11, 2 * t}));
      // hinge along y at the back-top edge; positive s lifts the front edge
      lid.joint = make_joint(JointKind::Revolute, -Eigen::Vector3d::UnitY(),
                             {-0.15, 0.0, 1.5 * t}, 0.0, 2.1);
      lid.contact_rest = {0.14, 0.0, 2 * t};  // front edge of the lid
      bp.parts = {base, lid};
      bp.interaction_delta = {0.45};  // ~26 degrees
      break;
    }
    case SceneCategory::Cabinet: {
      PartBlueprint body;
      body.pieces.push_back(box({-0.42, -0.25, 0.00}, {-0.02, 0.25, t}));
      body.pieces.push_back(box({-0.42, -0.25, 0.50 - t}, {-0.02, 0.25, 0.50}));
      body.pieces.push_back(box({-0.42, -0.25, t}, {-0.02, -0.25 + t, 0.50 - t}));
      body.pieces.push_back(box({-0.42, 0.25 - t, t}, {-0.02, 0.25, 0.50 - t}));
      body.pieces.push_back(box({-0.42, -0.25 + t, t}, {-0.42 + t, 0.25 - t, 0.50 - t}));
      PartBlueprint door;
      // door floats 2cm in front of the shell (protruding hinge bracket)
      door.pieces.push_back(box({0.0, -0.25, 0.02}, {t, 0.25, 0.48}));
      door.pieces.push_back(box({t, 0.17, 0.22}, {0.05, 0.21, 0.28}));  // knob
      // hinge at the -y edge; -z axis swings the free edge outward (+x)
      door.joint = make_joint(JointKind::Revolute, -Eigen::Vector3d::UnitZ(),
                              {0.01, -0.27, 0.25}, 0.0, 1.92);
      door.contact_rest = {0.05, 0.19, 0.25};  // knob face, far from the hinge
      bp.parts = {body, door};
      bp.interaction_delta = {0.50};  // ~29 degrees
      break;
    }
    case SceneCategory::Lamp: {
      PartBlueprint base;
      base.pieces.push_back(box({-0.08, -0.08, 0.0}, {0.08, 0.08, 0.04}));
      base.pieces.push_back(box({-0.02, -0.02, 0.04}, {0.02, 0.02, 0.34}));
      PartBlueprint head;
      head.pieces.push_back(box({-0.03, -0.05, 0.34}, {0.14, 0.05, 0.42}));
      head.joint = make_joint(JointKind::Revolute, Eigen::Vector3d::UnitY(),
                              {0.0, 0.0, 0.36}, -0.9, 0.9);
      head.contact_rest = {0.14, 0.0, 0.38};
      bp.parts = {base, head};
      bp.interaction_delta = {0.40};
      break;
    }
    case SceneCategory::TwoDoorCabinet: {
      PartBlueprint body;
      body.pieces.push_back(box({-0.42, -0.40, 0.00}, {-0.02, 0.40, t}));
      body.pieces.push_back(box({-0.42, -0.40, 0.60 - t}, {-0.02, 0.40, 0.60}));
      body.pieces.push_back(box({-0.42, -0.40, t}, {-0.02, -0.40 + t, 0.60 - t}));
      body.pieces.push_back(box({-0.42, 0.40 - t, t}, {-0.02, 0.40, 0.60 - t}));
      body.pieces.push_back(box({-0.42, -0.40 + t, t}, {-0.42 + t, 0.40 - t, 0.60 - t}));
      PartBlueprint left;
      left.pieces.push_back(box({0.0, -0.40, 0.02}, {t, -0.01, 0.58}));
      left.joint = make_joint(JointKind::Revolute, -Eigen::Vector3d::UnitZ(),
                              {0.01, -0.42, 0.30}, 0.0, 1.92);
      left.contact_rest = {t, -0.04, 0.30};  // near the free edge
      PartBlueprint right;
      right.pieces.push_back(box({0.0, 0.01, 0.02}, {t, 0.40, 0.58}));
      right.joint = make_joint(JointKind::Revolute, Eigen::Vector3d::UnitZ(),
                               {0.01, 0.42, 0.30}, 0.0, 1.92);
      right.contact_rest = {t, 0.04, 0.30};
      bp.parts = {body, left, right};
      bp.interaction_delta = {0.50, 0.50};
      break;
    }
    case SceneCategory::Fridge: {
      PartBlueprint body;
      body.pieces.push_back(box({-0.35, -0.30, 0.00}, {-0.02, 0.30, t}));
      body.pieces.push_back(box({-0.35, -0.30, 0.90 - t}, {-0.02, 0.30, 0.90}));
      body.pieces.push_back(box({-0.35, -0.30, t}, {-0.02, -0.30 + t, 0.90 - t}));
      body.pieces.push_back(box({-0.35, 0.30 - t, t}, {-0.02, 0.30, 0.90 - t}));
      body.pieces.push_back(box({-0.35, -0.30 + t, t}, {-0.35 + t, 0.30 - t, 0.90 - t}));
      body.pieces.push_back(box({-0.33, -0.28, 0.27}, {-0.02, 0.28, 0.27 + t}));  // shelf
      PartBlueprint top_door;
      top_door.pieces.push_back(box({0.0, -0.30, 0.52}, {t, 0.30, 0.88}));
      top_door.joint = make_joint(JointKind::Revolute, Eigen::Vector3d::UnitZ(),
                                  {0.01, 0.32, 0.70}, 0.0, 1.92);
      top_door.contact_rest = {t, -0.26, 0.70};
      PartBlueprint mid_door;
      mid_door.pieces.push_back(box({0.0, -0.30, 0.30}, {t, 0.30, 0.50}));
      mid_door.joint = make_joint(JointKind::Revolute, -Eigen::Vector3d::UnitZ(),
                                  {0.01, -0.32, 0.40}, 0.0, 1.92);
      mid_door.contact_rest = {t, 0.26, 0.40};
      PartBlueprint bin;
      bin.pieces.push_back(box({0.0, -0.28, 0.04}, {t, 0.28, 0.26}));           // drawer face
      bin.pieces.push_back(box({t, -0.06, 0.12}, {0.045, 0.06, 0.16}));         // handle
      bin.joint = make_joint(JointKind::Prismatic, Eigen::Vector3d::UnitX(),
                             {0.02, 0.0, 0.15}, 0.0, 0.30);
      bin.contact_rest = {0.045, 0.0, 0.14};
      bp.parts = {body, top_door, mid_door, bin};
      bp.interaction_delta = {0.50, 0.50, 0.12};
      break;
    }
  }
  return bp;
}

inline double triangle_area(const Point3& a, const Point3& b, const Point3& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

// Area-weighted surface samples, deterministic under the caller's rng.
inline std::vector<Point3> sample_mesh(const TriMesh& mesh, double spacing, Rng& rng) {
  std::vector<Point3> points;
  const double per_point_area = spacing * spacing;
  double carry = 0.0;
  for (const auto& tri : mesh.triangles) {
    const Point3& a = mesh.vertices[static_cast<std::size_t>(tri[0])];
    const Point3& b = mesh.vertices[static_cast<std::size_t>(tri[1])];
    const Point3& c = mesh.vertices[static_cast<std::size_t>(tri[2])];
    carry += triangle_area(a, b, c) / per_point_area;
    const int count = static_cast<int>(std::floor(carry));
    carry -= count;
    for (int i = 0; i < count; ++i) {
      double u = rng.uniform(), v = rng.uniform();
      if (u + v > 1.0) {
        u = 1.0 - u;
        v = 1.0 - v;
      }
      points.push_back(a + u * (b - a) + v * (c - a));
    }
  }
  return points;
}

}  // namespace synth_detail

inline std::vector<JointState> default_frame_states(SceneCategory category) {
  const synth_detail::Blueprint bp = synth_detail::build_blueprint(category);
  const std::size_t movable = bp.parts.size() - 1;
  std::vector<JointState> states;
  JointState s = JointState::zeros(movable);
  states.push_back(s);
  for (std::size_t k = 0; k < movable; ++k) {
    s.values[k] += bp.interaction_delta[k];
    states.push_back(s);
  }
  return states;
}

inline Scene generate_scene(const SceneRecipe& recipe) {
  recipe.check();
  const synth_detail::Blueprint bp = synth_detail::build_blueprint(recipe.category);
  const std::size_t movable = bp.parts.size() - 1;

  Scene scene;
  scene.intrinsics = recipe.intrinsics;
  scene.extrinsics = look_at_camera(recipe.camera_eye, recipe.camera_target);
  scene.frame_states =
      recipe.frame_states.empty() ? default_frame_states(recipe.category) : recipe.frame_states;
  require(scene.frame_states.size() == movable + 1, "invalid-input",
          "recipe must provide K+1 frame states");
  for (const JointState& s : scene.frame_states)
    require(s.values.size() == movable, "invalid-input", "frame state size mismatch");

  // ground-truth model; captured joint state = frame 0
  scene.truth.name = scene_category_name(recipe.category);
  for (std::size_t p = 0; p < bp.parts.size(); ++p) {
    Part part;
    part.id = static_cast<int>(p);
    part.parent = p == 0 ? -1 : 0;
    part.geometry = bp.parts[p].pieces;
    if (p > 0) {
      part.joint = bp.parts[p].joint;
      part.joint->state = scene.frame_states[0].values[p - 1];
    }
    scene.truth.parts.push_back(part);
  }
  scene.truth.check();

  // fixed rest-frame samples; per-frame poses move them, so clouds stay
  // index-aligned across frames (exact correspondences for the oracles)
  Rng sample_rng(substream(recipe.seed, 1));
  std::vector<std::vector<Point3>> rest_points(bp.parts.size());
  std::vector<std::vector<std::size_t>> piece_of_point(bp.parts.size());
  for (std::size_t p = 0; p < bp.parts.size(); ++p) {
    for (std::size_t piece = 0; piece < bp.parts[p].pieces.size(); ++piece) {
      const auto samples =
          synth_detail::sample_mesh(bp.parts[p].pieces[piece], recipe.sample_spacing, sample_rng);
      for (const Point3& q : samples) {
        rest_points[p].push_back(q);
        piece_of_point[p].push_back(piece);
      }
    }
    require(!rest_points[p].empty(), "invalid-input",
            "sample spacing too coarse for part geometry");
  }

  for (std::size_t k = 0; k < scene.frame_states.size(); ++k) {
    const auto poses = forward_kinematics(scene.truth, scene.frame_states[k]);
    SceneFrame frame;
    frame.cloud.labels = std::vector<int>{};
    Rng noise_rng(substream(recipe.seed, 2, k));
    std::size_t base_index = 0;
    for (std::size_t p = 0; p < bp.parts.size(); ++p) {
      std::vector<std::vector<std::size_t>> piece_groups(bp.parts[p].pieces.size());
      for (std::size_t i = 0; i < rest_points[p].size(); ++i) {
        Point3 q = poses[p].apply(rest_points[p][i]);
        if (recipe.noise_sigma > 0)
          q += Point3{noise_rng.normal(0, recipe.noise_sigma),
                      noise_rng.normal(0, recipe.noise_sigma),
                      noise_rng.normal(0, recipe.noise_sigma)};
        piece_groups[piece_of_point[p][i]].push_back(base_index + i);
        frame.cloud.points.push_back(q);
        frame.cloud.labels->push_back(static_cast<int>(p));
      }
      for (auto& group : piece_groups)
        if (!group.empty()) frame.subparts.push_back(std::move(group));
      base_index += rest_points[p].size();
    }

    // depth render of the posed model
    std::vector<Point3> cam_vertices;
    std::vector<std::array<int, 3>> cam_triangles;
    const RigidTransform base_to_cam = scene.extrinsics.base_to_camera();
    for (std::size_t p = 0; p < bp.parts.size(); ++p) {
      for (const TriMesh& piece : bp.parts[p].pieces) {
        const int offset = static_cast<int>(cam_vertices.size());
        for (const Point3& v : piece.vertices)
          cam_vertices.push_back(base_to_cam.apply(poses[p].apply(v)));
        for (const auto& tri : piece.triangles)
          cam_triangles.push_back({tri[0] + offset, tri[1] + offset, tri[2] + offset});
      }
    }
    RenderResult render =
        render_triangles_camera_frame(cam_vertices, cam_triangles, recipe.intrinsics);
    frame.depth = std::move(render.depth);
    frame.mask = std::move(render.mask);
    scene.frames.push_back(std::move(frame));
  }

  // contact point per interaction: the moved part's designated face center at
  // the post-interaction frame
  for (std::size_t k = 1; k < scene.frame_states.size(); ++k) {
    const auto poses = forward_kinematics(scene.truth, scene.frame_states[k]);
    scene.contacts.push_back(poses[k].apply(bp.parts[k].contact_rest));
  }
  for (std::size_t p = 1; p < bp.parts.size(); ++p)
    scene.contact_rest.push_back(bp.parts[p].contact_rest);
  return scene;
}

}  // namespace twinforge
