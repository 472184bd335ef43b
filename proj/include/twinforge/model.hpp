#pragma once

#include <cmath>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "twinforge/common.hpp"
#include "twinforge/geometry.hpp"
#include "twinforge/io.hpp"
#include "twinforge/xml.hpp"

namespace twinforge {

enum class JointKind { Prismatic, Revolute };

inline const char* joint_kind_name(JointKind kind) {
  return kind == JointKind::Prismatic ? "prismatic" : "revolute";
}

// 1-DoF joint. Axis and origin are expressed in the model rest frame (the
// configuration in which all part geometry is authored); origin is a point on
// the axis and is irrelevant for prismatic motion.
struct Joint {
  JointKind kind = JointKind::Prismatic;
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
  Point3 origin = Point3::Zero();
  double lower = 0.0;
  double upper = 0.0;
  double state = 0.0;  // joint value captured with the model (meters or radians)

  // Rest-frame-to-displaced transform for joint value s.
  RigidTransform motion(double s) const {
    if (kind == JointKind::Prismatic) return RigidTransform::from_translation(s * axis);
    return RigidTransform::about_axis(axis, s, origin);
  }
};

struct MeshRef {
  std::string filename;
  Point3 visual_offset = Point3::Zero();  // visual-origin translation from the URDF
};

struct Part {
  int id = 0;
  int parent = -1;                // -1 for the root part
  std::optional<Joint> joint;     // absent for the root part
  std::vector<TriMesh> geometry;  // convex pieces, vertices in model rest frame
  std::vector<MeshRef> mesh_refs; // unresolved references produced by from_urdf
};

struct JointState {
  std::vector<double> values;  // one entry per movable part, indexed by part id - 1

  static JointState zeros(std::size_t count) { return {std::vector<double>(count, 0.0)}; }
};

// Explicit world model: part tree with 1-DoF joints plus per-part geometry.
struct ArticulatedModel {
  std::string name = "twinforge_model";
  std::vector<Part> parts;  // ordered by id, parts[0] is the root
  RigidTransform base_pose;

  std::size_t movable_count() const { return parts.empty() ? 0 : parts.size() - 1; }

  JointState captured_state() const {
    JointState s;
    for (std::size_t k = 1; k < parts.size(); ++k) s.values.push_back(parts[k].joint->state);
    return s;
  }

  void check() const {
    require(!parts.empty(), "invalid-input", "model has no parts");
    for (std::size_t i = 0; i < parts.size(); ++i)
      require(parts[i].id == static_cast<int>(i), "invalid-input", "part ids must be dense 0..K");
    require(!parts[0].joint && parts[0].parent == -1, "invalid-input",
            "part 0 must be the root (no joint)");
    for (std::size_t i = 1; i < parts.size(); ++i) {
      const Part& part = parts[i];
      require(part.joint.has_value(), "invalid-input",
              "movable part " + std::to_string(i) + " has no joint");
      require(part.parent >= 0 && part.parent < static_cast<int>(parts.size()) &&
                  part.parent != part.id,
              "invalid-input", "part " + std::to_string(i) + " has an invalid parent");
      const Joint& joint = *part.joint;
      require(std::abs(joint.axis.norm() - 1.0) <= 1e-6, "invalid-input",
              "joint axis must be a unit vector");
      require(finite(joint.origin) && std::isfinite(joint.lower) && std::isfinite(joint.upper),
              "invalid-input", "joint parameters must be finite");
      require(joint.lower <= joint.upper, "invalid-input", "joint limits reversed");
      require(joint.state >= joint.lower - 1e-12 && joint.state <= joint.upper + 1e-12,
              "limit-violation", "joint state outside limits");
    }
    // walk to the root from every part; revisiting a part means a cycle
    for (std::size_t i = 1; i < parts.size(); ++i) {
      std::vector<bool> seen(parts.size(), false);
      int cursor = static_cast<int>(i);
      while (cursor != 0) {
        require(!seen[static_cast<std::size_t>(cursor)], "cyclic-structure",
                "part graph contains a cycle through part " + std::to_string(cursor));
        seen[static_cast<std::size_t>(cursor)] = true;
        cursor = parts[static_cast<std::size_t>(cursor)].parent;
        require(cursor >= 0, "invalid-input", "part graph is disconnected");
      }
    }
  }
};

// World pose of every part (transform from the rest frame to world) at the
// given joint state.
inline std::vector<RigidTransform> forward_kinematics(const ArticulatedModel& model,
                                                      const JointState& state) {
  require(state.values.size() == model.movable_count(), "invalid-input",
          "joint state size does not match movable part count");
  for (std::size_t k = 1; k < model.parts.size(); ++k) {
    const Joint& joint = *model.parts[k].joint;
    const double s = state.values[k - 1];
    require(s >= joint.lower - 1e-12 && s <= joint.upper + 1e-12, "limit-violation",
            "joint " + std::to_string(k) + " state " + format_double(s) + " outside [" +
                format_double(joint.lower) + ", " + format_double(joint.upper) + "]");
  }
  std::vector<RigidTransform> poses(model.parts.size());
  std::vector<bool> done(model.parts.size(), false);
  poses[0] = model.base_pose;
  done[0] = true;
  // parents may appear after children in id order; sweep until settled
  std::size_t remaining = model.parts.size() - 1;
  while (remaining > 0) {
    bool progress = false;
    for (std::size_t k = 1; k < model.parts.size(); ++k) {
      if (done[k]) continue;
      const Part& part = model.parts[k];
      if (!done[static_cast<std::size_t>(part.parent)]) continue;
      poses[k] = poses[static_cast<std::size_t>(part.parent)].compose(
          part.joint->motion(state.values[k - 1]));
      done[k] = true;
      --remaining;
      progress = true;
    }
    require(progress, "cyclic-structure", "part graph contains a cycle");
  }
  return poses;
}

// --- URDF subset (see docs/urdf_subset.md) ---------------------------------

inline Eigen::Matrix3d rpy_to_rotation(double roll, double pitch, double yaw) {
  return (Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()) *
          Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

inline Eigen::Vector3d rotation_to_rpy(const Eigen::Matrix3d& r) {
  const double sin_pitch = -r(2, 0);
  if (std::abs(sin_pitch) > 1.0 - 1e-12) {
    const double pitch = sin_pitch > 0 ? M_PI / 2 : -M_PI / 2;
    return {0.0, pitch, std::atan2(-r(0, 1), r(1, 1))};
  }
  return {std::atan2(r(2, 1), r(2, 2)), std::asin(sin_pitch), std::atan2(r(1, 0), r(0, 0))};
}

namespace detail {

inline std::string vec3_attr(const Eigen::Vector3d& v) {
  return format_double(v.x()) + " " + format_double(v.y()) + " " + format_double(v.z());
}

inline Eigen::Vector3d parse_vec3(const std::string& text, int line, const std::string& what) {
  std::istringstream in(text);
  Eigen::Vector3d v;
  if (!(in >> v.x() >> v.y() >> v.z()))
    fail("parse-error", "line " + std::to_string(line) + ": " + what + " needs 3 numbers");
  return v;
}

inline double parse_number(const std::string& text, int line, const std::string& what) {
  std::istringstream in(text);
  double v = 0;
  if (!(in >> v))
    fail("parse-error", "line " + std::to_string(line) + ": " + what + " is not a number");
  return v;
}

inline std::string mesh_filename(const Part& part, std::size_t piece) {
  if (piece < part.geometry.size() && !part.geometry[piece].name.empty())
    return part.geometry[piece].name;
  if (piece < part.mesh_refs.size() && !part.mesh_refs[piece].filename.empty())
    return part.mesh_refs[piece].filename;
  return "part_" + std::to_string(part.id) + "_" + std::to_string(piece) + ".off";
}

}  // namespace detail

// Serializes the model to the documented URDF subset. Mesh files referenced by
// the output hold rest-frame vertices; each link's visual/collision origin
// carries -joint_origin so standard URDF semantics reproduce the rest pose.
inline std::string to_urdf(const ArticulatedModel& model) {
  model.check();
  std::ostringstream os;
  os << "<?xml version=\"1.0\"?>\n";
  os << "<robot name=\"" << model.name << "\">\n";
  const Eigen::Vector3d base_rpy = rotation_to_rpy(model.base_pose.rotation);
  os << "  <twinforge_base_pose xyz=\"" << detail::vec3_attr(model.base_pose.translation)
     << "\" rpy=\"" << detail::vec3_attr(base_rpy) << "\"/>\n";
  for (const Part& part : model.parts) {
    const Point3 joint_origin = part.joint ? part.joint->origin : Point3::Zero();
    os << "  <link name=\"part_" << part.id << "\">\n";
    const std::size_t pieces = std::max(part.geometry.size(), part.mesh_refs.size());
    for (std::size_t j = 0; j < pieces; ++j) {
      const std::string filename = detail::mesh_filename(part, j);
      for (const char* tag : {"visual", "collision"}) {
        os << "    <" << tag << ">\n";
        os << "      <origin xyz=\"" << detail::vec3_attr(-joint_origin)
           << "\" rpy=\"0 0 0\"/>\n";
        os << "      <geometry><mesh filename=\"" << filename << "\"/></geometry>\n";
        os << "    </" << tag << ">\n";
      }
    }
    os << "  </link>\n";
  }
  for (const Part& part : model.parts) {
    if (!part.joint) continue;
    const Joint& joint = *part.joint;
    const Part& parent = model.parts[static_cast<std::size_t>(part.parent)];
    const Point3 parent_origin = parent.joint ? parent.joint->origin : Point3::Zero();
    os << "  <joint name=\"joint_" << part.id << "\" type=\"" << joint_kind_name(joint.kind)
       << "\">\n";
    os << "    <parent link=\"part_" << part.parent << "\"/>\n";
    os << "    <child link=\"part_" << part.id << "\"/>\n";
    os << "    <origin xyz=\"" << detail::vec3_attr(joint.origin - parent_origin)
       << "\" rpy=\"0 0 0\"/>\n";
    os << "    <axis xyz=\"" << detail::vec3_attr(joint.axis) << "\"/>\n";
    os << "    <limit lower=\"" << format_double(joint.lower) << "\" upper=\""
       << format_double(joint.upper) << "\"/>\n";
    os << "    <twinforge_state value=\"" << format_double(joint.state) << "\"/>\n";
    os << "  </joint>\n";
  }
  os << "</robot>\n";
  return os.str();
}

inline ArticulatedModel from_urdf(const std::string& text) {
  const XmlNode root = XmlParser::parse(text);
  require(root.name == "robot", "parse-error",
          "line " + std::to_string(root.line) + ": root element must be <robot>, got <" +
              root.name + ">");

  ArticulatedModel model;
  if (const std::string* name = root.attribute("name")) model.name = *name;
  if (const XmlNode* base = root.child("twinforge_base_pose")) {
    const std::string* xyz = base->attribute("xyz");
    const std::string* rpy = base->attribute("rpy");
    require(xyz && rpy, "parse-error",
            "line " + std::to_string(base->line) + ": twinforge_base_pose needs xyz and rpy");
    model.base_pose.translation = detail::parse_vec3(*xyz, base->line, "base xyz");
    const Eigen::Vector3d angles = detail::parse_vec3(*rpy, base->line, "base rpy");
    model.base_pose.rotation = rpy_to_rotation(angles.x(), angles.y(), angles.z());
  }

  struct LinkInfo {
    std::string name;
    std::vector<MeshRef> meshes;
    int line = 0;
  };
  std::vector<LinkInfo> links;
  for (const XmlNode* link : root.children_named("link")) {
    LinkInfo info;
    info.line = link->line;
    const std::string* name = link->attribute("name");
    require(name != nullptr, "parse-error",
            "line " + std::to_string(link->line) + ": <link> missing name");
    info.name = *name;
    for (const XmlNode* visual : link->children_named("visual")) {
      MeshRef ref;
      if (const XmlNode* origin = visual->child("origin")) {
        if (const std::string* xyz = origin->attribute("xyz"))
          ref.visual_offset = detail::parse_vec3(*xyz, origin->line, "visual origin xyz");
        if (const std::string* rpy = origin->attribute("rpy")) {
          const Eigen::Vector3d angles = detail::parse_vec3(*rpy, origin->line, "visual rpy");
          require(angles.cwiseAbs().maxCoeff() <= 1e-12, "unsupported-feature",
                  "line " + std::to_string(origin->line) +
                      ": rotated visual origins are outside the supported subset");
        }
      }
      const XmlNode* geometry = visual->child("geometry");
      require(geometry != nullptr, "parse-error",
              "line " + std::to_string(visual->line) + ": <visual> missing <geometry>");
      const XmlNode* mesh = geometry->child("mesh");
      require(mesh != nullptr, "unsupported-feature",
              "line " + std::to_string(geometry->line) +
                  ": only <mesh> geometry is in the supported subset");
      const std::string* filename = mesh->attribute("filename");
      require(filename != nullptr, "parse-error",
              "line " + std::to_string(mesh->line) + ": <mesh> missing filename");
      ref.filename = *filename;
      info.meshes.push_back(ref);
    }
    links.push_back(info);
  }
  require(!links.empty(), "parse-error", "robot has no links");

  auto link_index = [&](const std::string& name, int line) -> std::size_t {
    for (std::size_t i = 0; i < links.size(); ++i)
      if (links[i].name == name) return i;
    fail("parse-error", "line " + std::to_string(line) + ": unknown link '" + name + "'");
  };

  struct JointInfo {
    bool present = false;
    int parent = -1;
    Joint joint;
  };
  std::vector<JointInfo> joints(links.size());
  for (const XmlNode* joint_node : root.children_named("joint")) {
    const std::string* jname = joint_node->attribute("name");
    const std::string joint_label = jname ? *jname : "<unnamed>";
    const std::string* type = joint_node->attribute("type");
    require(type != nullptr, "parse-error",
            "line " + std::to_string(joint_node->line) + ": joint '" + joint_label +
                "' missing type");
    Joint joint;
    if (*type == "prismatic")
      joint.kind = JointKind::Prismatic;
    else if (*type == "revolute")
      joint.kind = JointKind::Revolute;
    else
      fail("unsupported-joint", "line " + std::to_string(joint_node->line) + ": joint '" +
                                    joint_label + "' has unsupported type \"" + *type + "\"");

    const XmlNode* parent_node = joint_node->child("parent");
    const XmlNode* child_node = joint_node->child("child");
    require(parent_node && parent_node->attribute("link"), "parse-error",
            "line " + std::to_string(joint_node->line) + ": joint '" + joint_label +
                "' missing <parent link=...>");
    require(child_node && child_node->attribute("link"), "parse-error",
            "line " + std::to_string(joint_node->line) + ": joint '" + joint_label +
                "' missing <child link=...>");
    const std::size_t parent_idx = link_index(*parent_node->attribute("link"), parent_node->line);
    const std::size_t child_idx = link_index(*child_node->attribute("link"), child_node->line);
    require(!joints[child_idx].present, "parse-error",
            "line " + std::to_string(joint_node->line) + ": link '" + links[child_idx].name +
                "' has more than one parent joint");

    Eigen::Vector3d origin_xyz = Eigen::Vector3d::Zero();
    if (const XmlNode* origin = joint_node->child("origin")) {
      if (const std::string* xyz = origin->attribute("xyz"))
        origin_xyz = detail::parse_vec3(*xyz, origin->line, "joint origin xyz");
      if (const std::string* rpy = origin->attribute("rpy")) {
        const Eigen::Vector3d angles = detail::parse_vec3(*rpy, origin->line, "joint rpy");
        require(angles.cwiseAbs().maxCoeff() <= 1e-12, "unsupported-feature",
                "line " + std::to_string(origin->line) +
                    ": rotated joint origins are outside the supported subset");
      }
    }
    joint.axis = Eigen::Vector3d::UnitX();  // URDF default
    if (const XmlNode* axis = joint_node->child("axis")) {
      const std::string* xyz = axis->attribute("xyz");
      require(xyz != nullptr, "parse-error",
              "line " + std::to_string(axis->line) + ": <axis> missing xyz");
      joint.axis = detail::parse_vec3(*xyz, axis->line, "axis xyz");
      require(joint.axis.norm() > 1e-9, "parse-error",
              "line " + std::to_string(axis->line) + ": axis must be non-zero");
      joint.axis.normalize();
    }
    const XmlNode* limit = joint_node->child("limit");
    require(limit != nullptr, "parse-error",
            "line " + std::to_string(joint_node->line) + ": joint '" + joint_label +
                "' missing <limit>");
    const std::string* lower = limit->attribute("lower");
    const std::string* upper = limit->attribute("upper");
    require(lower && upper, "parse-error",
            "line " + std::to_string(limit->line) + ": <limit> needs lower and upper");
    joint.lower = detail::parse_number(*lower, limit->line, "limit lower");
    joint.upper = detail::parse_number(*upper, limit->line, "limit upper");
    require(joint.lower <= joint.upper, "parse-error",
            "line " + std::to_string(limit->line) + ": limit lower exceeds upper");
    joint.state = std::clamp(0.0, joint.lower, joint.upper);
    if (const XmlNode* state = joint_node->child("twinforge_state")) {
      const std::string* value = state->attribute("value");
      require(value != nullptr, "parse-error",
              "line " + std::to_string(state->line) + ": twinforge_state missing value");
      joint.state = detail::parse_number(*value, state->line, "joint state");
    }
    // origin is parent-link-relative here; resolved to the model frame below
    joint.origin = origin_xyz;
    joints[child_idx] = {true, static_cast<int>(parent_idx), joint};
  }

  // exactly one root
  int root_idx = -1;
  for (std::size_t i = 0; i < links.size(); ++i) {
    if (!joints[i].present) {
      require(root_idx < 0, "parse-error",
              "links '" + links[static_cast<std::size_t>(root_idx < 0 ? i : root_idx)].name +
                  "' and '" + links[i].name + "' are both roots");
      root_idx = static_cast<int>(i);
    }
  }
  require(root_idx >= 0, "cyclic-structure", "every link has a parent; the joint graph is cyclic");

  // order parts: root first, remaining links in document order
  std::vector<int> part_of_link(links.size(), -1);
  std::vector<std::size_t> link_of_part;
  part_of_link[static_cast<std::size_t>(root_idx)] = 0;
  link_of_part.push_back(static_cast<std::size_t>(root_idx));
  for (std::size_t i = 0; i < links.size(); ++i) {
    if (static_cast<int>(i) == root_idx) continue;
    part_of_link[i] = static_cast<int>(link_of_part.size());
    link_of_part.push_back(i);
  }

  // resolve joint origins from parent-relative to model frame (walk from root)
  std::vector<Point3> model_origin(links.size(), Point3::Zero());
  std::vector<bool> resolved(links.size(), false);
  resolved[static_cast<std::size_t>(root_idx)] = true;
  std::size_t remaining = links.size() - 1;
  while (remaining > 0) {
    bool progress = false;
    for (std::size_t i = 0; i < links.size(); ++i) {
      if (resolved[i] || !joints[i].present) continue;
      const auto parent = static_cast<std::size_t>(joints[i].parent);
      if (!resolved[parent]) continue;
      model_origin[i] = model_origin[parent] + joints[i].joint.origin;
      resolved[i] = true;
      --remaining;
      progress = true;
    }
    require(progress, "cyclic-structure", "the joint graph contains a cycle");
  }

  for (std::size_t p = 0; p < link_of_part.size(); ++p) {
    const std::size_t link_idx = link_of_part[p];
    Part part;
    part.id = static_cast<int>(p);
    if (p > 0) {
      part.parent = part_of_link[static_cast<std::size_t>(joints[link_idx].parent)];
      part.joint = joints[link_idx].joint;
      part.joint->origin = model_origin[link_idx];
    }
    for (const MeshRef& ref : links[link_idx].meshes) {
      MeshRef resolved_ref = ref;
      // rest-frame position of file vertices = joint origin + visual offset + v
      resolved_ref.visual_offset = model_origin[link_idx] + ref.visual_offset;
      part.mesh_refs.push_back(resolved_ref);
    }
    model.parts.push_back(part);
  }
  model.check();
  return model;
}

// Writes model.urdf plus one OFF file per geometry piece into `dir`.
inline void save_model(const ArticulatedModel& model, const std::string& dir,
                       const std::string& urdf_name = "model.urdf") {
  std::filesystem::create_directories(dir);
  ArticulatedModel named = model;
  for (Part& part : named.parts)
    for (std::size_t j = 0; j < part.geometry.size(); ++j)
      if (part.geometry[j].name.empty())
        part.geometry[j].name = "part_" + std::to_string(part.id) + "_" + std::to_string(j) + ".off";
  write_text_file((std::filesystem::path(dir) / urdf_name).string(), to_urdf(named));
  for (const Part& part : named.parts)
    for (const TriMesh& mesh : part.geometry)
      save_mesh((std::filesystem::path(dir) / mesh.name).string(), mesh);
}

// Parses a URDF file and loads its referenced OFF meshes (paths resolved
// relative to the URDF's directory), converting vertices to the rest frame.
inline ArticulatedModel load_model(const std::string& urdf_path) {
  ArticulatedModel model = from_urdf(read_text_file(urdf_path));
  const std::filesystem::path dir = std::filesystem::path(urdf_path).parent_path();
  for (Part& part : model.parts) {
    for (const MeshRef& ref : part.mesh_refs) {
      TriMesh mesh = load_mesh((dir / ref.filename).string());
      for (Point3& v : mesh.vertices) v += ref.visual_offset;
      part.geometry.push_back(mesh);
    }
  }
  return model;
}

}  // namespace twinforge
