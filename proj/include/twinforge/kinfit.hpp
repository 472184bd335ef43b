#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <vector>

#include "twinforge/convex.hpp"
#include "twinforge/geometry.hpp"
#include "twinforge/model.hpp"
#include "twinforge/segmentation.hpp"

namespace twinforge {

// Rigid transform expressed as rotation about a line plus translation along it.
struct ScrewMotion {
  double rotation_angle = 0.0;                        // in [0, pi]
  Eigen::Vector3d rotation_axis = Eigen::Vector3d::UnitZ();
  Point3 axis_origin = Point3::Zero();                // minimum-norm point on the axis
  double translation_along_axis = 0.0;
};

inline ScrewMotion screw_decompose(const RigidTransform& transform) {
  ScrewMotion screw;
  const Eigen::AngleAxisd aa(transform.rotation);
  screw.rotation_angle = aa.angle();
  if (screw.rotation_angle < 1e-8) {
    // pure translation: the axis is the translation direction
    screw.rotation_angle = 0.0;
    const double norm = transform.translation.norm();
    screw.rotation_axis = norm > 0 ? (transform.translation / norm).eval()
                                   : Eigen::Vector3d::UnitZ();
    screw.axis_origin = Point3::Zero();
    screw.translation_along_axis = norm;
    return screw;
  }
  screw.rotation_axis = aa.axis();
  screw.translation_along_axis = screw.rotation_axis.dot(transform.translation);
  const Eigen::Vector3d t_perp =
      transform.translation - screw.translation_along_axis * screw.rotation_axis;
  // minimum-norm solution of (I - R) o = t_perp
  const double half = 0.5 * screw.rotation_angle;
  screw.axis_origin =
      0.5 * (t_perp + screw.rotation_axis.cross(t_perp) / std::tan(half));
  return screw;
}

inline RigidTransform screw_compose(const ScrewMotion& screw) {
  RigidTransform out;
  out.rotation = Eigen::AngleAxisd(screw.rotation_angle, screw.rotation_axis).toRotationMatrix();
  out.translation = (Eigen::Matrix3d::Identity() - out.rotation) * screw.axis_origin +
                    screw.translation_along_axis * screw.rotation_axis;
  return out;
}

inline constexpr double kDefaultAngleThreshold = 3.0 * M_PI / 180.0;
inline constexpr double kTranslationFloor = 0.005;  // meters

// Prismatic iff the rotation angle stays below the threshold; errors when the
// motion is inside both noise floors (the caller should interact again). The
// translation floor uses the full displacement: a slide with a parasitic
// rotation has its screw axis perpendicular to the slide, so the along-axis
// component would miss it.
inline JointKind classify_joint(const ScrewMotion& screw,
                                double angle_threshold = kDefaultAngleThreshold) {
  const bool enough_angle = screw.rotation_angle > angle_threshold;
  const double total_translation = screw_compose(screw).translation.norm();
  require(enough_angle || total_translation > kTranslationFloor, "insufficient-motion",
          "observed motion is below the angle and translation floors");
  return screw.rotation_angle < angle_threshold ? JointKind::Prismatic : JointKind::Revolute;
}

struct IcpResult {
  RigidTransform transform;
  bool converged = true;
  double residual = 0.0;  // mean point distance under the final transform
};

// Rigid transform between two observations of one part. With correspondences
// this is a single least-squares fit; without, iterative closest point from
// an identity initialization.
inline IcpResult estimate_part_transform(
    const PointCloud& part_prev, const PointCloud& part_cur,
    const std::optional<std::vector<std::pair<std::size_t, std::size_t>>>& correspondences =
        std::nullopt) {
  part_prev.check();
  part_cur.check();
  if (correspondences) {
    std::vector<Point3> src, dst;
    for (const auto& [i, j] : *correspondences) {
      src.push_back(part_prev.points[i]);
      dst.push_back(part_cur.points[j]);
    }
    IcpResult out;
    out.transform = fit_rigid_transform(src, dst);
    double sum = 0;
    for (const auto& [i, j] : *correspondences)
      sum += (out.transform.apply(part_prev.points[i]) - part_cur.points[j]).norm();
    out.residual = sum / static_cast<double>(correspondences->size());
    return out;
  }

  const KdTree target_tree(part_cur.points);
  IcpResult out;
  double prev_residual = std::numeric_limits<double>::infinity();
  for (int iteration = 0; iteration < 50; ++iteration) {
    std::vector<Point3> matched(part_prev.size());
    double sum = 0;
    for (std::size_t i = 0; i < part_prev.size(); ++i) {
      const Point3 moved = out.transform.apply(part_prev.points[i]);
      const auto [idx, dist] = target_tree.nearest(moved);
      matched[i] = part_cur.points[idx];
      sum += dist;
    }
    out.residual = sum / static_cast<double>(part_prev.size());
    if (std::abs(prev_residual - out.residual) < 1e-6) return out;
    prev_residual = out.residual;
    out.transform = fit_rigid_transform(part_prev.points, matched);
  }
  out.converged = false;
  return out;
}

struct JointEstimate {
  JointKind kind = JointKind::Prismatic;
  Eigen::Vector3d axis = Eigen::Vector3d::UnitX();
  std::optional<Point3> origin;          // revolute only
  std::vector<double> displacement;      // per frame, relative to frame 0
  double residual = 0.0;

  Joint to_joint(double limit_margin) const {
    Joint joint;
    joint.kind = kind;
    joint.axis = axis;
    joint.origin = origin.value_or(Point3::Zero());
    double lo = displacement.front(), hi = displacement.front();
    for (double d : displacement) {
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
    const double margin = limit_margin * (hi - lo);
    joint.lower = lo - margin;
    joint.upper = hi + margin;
    joint.state = displacement.back();
    return joint;
  }
};

struct FitJointOptions {
  double angle_threshold = kDefaultAngleThreshold;
  // exact index correspondences across frames (synthetic pipelines sample
  // parts once and transform them); falls back to ICP when false
  bool index_correspondence = true;
};

// Joint parameters for one part from its per-frame clouds. Consecutive-pair
// transforms give the joint class and axis; displacements come from
// frame-0-to-frame-k transforms; the axis is the sign-aligned mean and the
// origin the least-squares point closest to all per-pair screw axes.
inline JointEstimate fit_joint(const std::vector<PointCloud>& part_frames,
                               const FitJointOptions& options = {}) {
  require(part_frames.size() >= 2, "invalid-input", "need at least 2 frames of the part");
  for (const PointCloud& frame : part_frames) frame.check();

  bool aligned = options.index_correspondence;
  for (std::size_t k = 1; k < part_frames.size(); ++k)
    if (part_frames[k].size() != part_frames[0].size()) aligned = false;

  auto pair_transform = [&](std::size_t a, std::size_t b) {
    if (aligned) {
      std::vector<std::pair<std::size_t, std::size_t>> corr(part_frames[a].size());
      for (std::size_t i = 0; i < corr.size(); ++i) corr[i] = {i, i};
      return estimate_part_transform(part_frames[a], part_frames[b], corr);
    }
    return estimate_part_transform(part_frames[a], part_frames[b]);
  };

  struct PairEvidence {
    std::size_t frame = 0;
    ScrewMotion screw;
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();
    JointKind kind = JointKind::Prismatic;
    double magnitude = 0.0;
  };
  std::vector<PairEvidence> evidence;
  for (std::size_t k = 1; k < part_frames.size(); ++k) {
    const IcpResult icp = pair_transform(k - 1, k);
    const ScrewMotion screw = screw_decompose(icp.transform);
    const bool significant = screw.rotation_angle > options.angle_threshold ||
                             icp.transform.translation.norm() > kTranslationFloor;
    if (!significant) continue;
    PairEvidence ev;
    ev.frame = k;
    ev.screw = screw;
    ev.translation = icp.transform.translation;
    ev.kind = classify_joint(screw, options.angle_threshold);
    ev.magnitude = screw.rotation_angle + icp.transform.translation.norm();
    evidence.push_back(ev);
  }
  require(!evidence.empty(), "insufficient-motion",
          "no frame pair shows motion above the noise floors");

  std::size_t largest = 0;
  for (std::size_t e = 1; e < evidence.size(); ++e)
    if (evidence[e].magnitude > evidence[largest].magnitude) largest = e;

  for (const PairEvidence& ev : evidence) {
    if (ev.kind == evidence[largest].kind) continue;
    std::ostringstream os;
    os << "frame pairs disagree on the joint class:";
    for (const PairEvidence& e : evidence)
      os << " pair(" << e.frame - 1 << "," << e.frame << ")=" << joint_kind_name(e.kind);
    fail("conflicting-evidence", os.str());
  }

  JointEstimate estimate;
  estimate.kind = evidence[largest].kind;

  // sign-aligned axis mean; prismatic axes are translation directions, the
  // screw rotation axis there only reflects parasitic rotation noise
  auto pair_axis = [&](const PairEvidence& ev) -> Eigen::Vector3d {
    if (estimate.kind == JointKind::Prismatic) return ev.translation.normalized();
    return ev.screw.rotation_axis;
  };
  const Eigen::Vector3d reference = pair_axis(evidence[largest]);
  Eigen::Vector3d axis_sum = Eigen::Vector3d::Zero();
  for (const PairEvidence& ev : evidence) {
    const Eigen::Vector3d axis = pair_axis(ev);
    axis_sum += axis * (axis.dot(reference) < 0 ? -1.0 : 1.0);
  }
  estimate.axis = axis_sum.normalized();

  if (estimate.kind == JointKind::Revolute) {
    // least-squares point minimizing distance to every per-pair screw axis;
    // minimum-norm along the common axis direction
    Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
    Eigen::Vector3d b = Eigen::Vector3d::Zero();
    for (const PairEvidence& ev : evidence) {
      const Eigen::Matrix3d proj =
          Eigen::Matrix3d::Identity() - ev.screw.rotation_axis * ev.screw.rotation_axis.transpose();
      a += proj;
      b += proj * ev.screw.axis_origin;
    }
    Eigen::CompleteOrthogonalDecomposition<Eigen::Matrix3d> cod(a);
    cod.setThreshold(1e-9);
    estimate.origin = cod.solve(b);
  }

  // displacement per frame relative to frame 0
  estimate.displacement.assign(part_frames.size(), 0.0);
  std::vector<RigidTransform> to_frame(part_frames.size());
  for (std::size_t k = 1; k < part_frames.size(); ++k) {
    const IcpResult icp = pair_transform(0, k);
    to_frame[k] = icp.transform;
    if (estimate.kind == JointKind::Prismatic) {
      estimate.displacement[k] = estimate.axis.dot(icp.transform.translation);
    } else {
      const ScrewMotion screw = screw_decompose(icp.transform);
      const double sign = screw.rotation_axis.dot(estimate.axis) < 0 ? -1.0 : 1.0;
      estimate.displacement[k] = sign * screw.rotation_angle;
    }
  }

  // residual: frame-0 points moved by the fitted joint vs the observed frames
  Joint fitted = estimate.to_joint(0.0);
  double residual_sum = 0.0;
  std::size_t residual_count = 0;
  for (std::size_t k = 1; k < part_frames.size(); ++k) {
    const RigidTransform motion = fitted.motion(estimate.displacement[k]);
    if (aligned) {
      for (std::size_t i = 0; i < part_frames[0].size(); ++i) {
        residual_sum += (motion.apply(part_frames[0].points[i]) - part_frames[k].points[i]).norm();
        ++residual_count;
      }
    } else {
      const KdTree tree(part_frames[k].points);
      for (std::size_t i = 0; i < part_frames[0].size(); ++i) {
        residual_sum += tree.nearest(motion.apply(part_frames[0].points[i])).second;
        ++residual_count;
      }
    }
  }
  estimate.residual = residual_sum / static_cast<double>(residual_count);
  return estimate;
}

// Per-frame clouds of one labeled part. Requires index-aligned frames (the
// synthetic pipeline samples parts once and re-poses them); labels come from
// the final frame.
inline std::vector<PointCloud> extract_part_frames(const std::vector<PointCloud>& frames,
                                                   const std::vector<int>& final_labels,
                                                   int part_id) {
  require(!frames.empty(), "invalid-input", "no frames given");
  for (const PointCloud& frame : frames)
    require(frame.size() == final_labels.size(), "invalid-input",
            "frames must be index-aligned with the final labels");
  std::vector<PointCloud> part_frames(frames.size());
  for (std::size_t i = 0; i < final_labels.size(); ++i) {
    if (final_labels[i] != part_id) continue;
    for (std::size_t k = 0; k < frames.size(); ++k)
      part_frames[k].points.push_back(frames[k].points[i]);
  }
  require(!part_frames[0].empty(), "invalid-input",
          "no points carry label " + std::to_string(part_id));
  return part_frames;
}

struct BuildModelOptions {
  double limit_margin = 0.5;  // widen observed range by this fraction per side
};

// Assembles the star-topology explicit model: joints from the estimates,
// geometry from convex hulls of the labeled final-frame points (un-posed back
// to the rest configuration), unless meshes are supplied.
inline ArticulatedModel build_model(const SegmentationLabels& segmentation,
                                    const PointCloud& final_frame,
                                    const std::vector<JointEstimate>& estimates,
                                    const std::vector<std::vector<TriMesh>>* meshes = nullptr,
                                    const BuildModelOptions& options = {}) {
  final_frame.check();
  require(segmentation.labels.size() == final_frame.size(), "invalid-input",
          "segmentation size does not match the final frame");
  int max_label = 0;
  for (int label : segmentation.labels) max_label = std::max(max_label, label);
  require(estimates.size() == static_cast<std::size_t>(max_label), "incomplete-model",
          "need one joint estimate per movable label (have " + std::to_string(estimates.size()) +
              ", labels imply " + std::to_string(max_label) + ")");

  ArticulatedModel model;
  for (int part_id = 0; part_id <= max_label; ++part_id) {
    Part part;
    part.id = part_id;
    if (part_id > 0) {
      part.parent = 0;
      part.joint = estimates[static_cast<std::size_t>(part_id - 1)].to_joint(options.limit_margin);
    }
    if (meshes) {
      require(meshes->size() == static_cast<std::size_t>(max_label) + 1, "invalid-input",
              "mesh list must cover every part");
      part.geometry = (*meshes)[static_cast<std::size_t>(part_id)];
    } else {
      std::vector<Point3> rest_points;
      const RigidTransform unpose =
          part_id == 0 ? RigidTransform::identity()
                       : part.joint->motion(part.joint->state).inverse();
      for (std::size_t i = 0; i < final_frame.size(); ++i)
        if (segmentation.labels[i] == part_id)
          rest_points.push_back(unpose.apply(final_frame.points[i]));
      require(!rest_points.empty(), "incomplete-model",
              "label " + std::to_string(part_id) + " has no points");
      part.geometry.push_back(convex_hull(rest_points));
    }
    model.parts.push_back(std::move(part));
  }
  model.check();
  return model;
}

}  // namespace twinforge
