#pragma once

#include <cmath>
#include <optional>

#include "twinforge/geometry.hpp"

namespace twinforge {

// 2D affordance prediction for one view: contact pixel plus post-contact
// pixel-space trajectory. Produced by an external network; consumed from files.
struct PixelAffordance {
  PixelCoord contact;
  Eigen::Vector2d trajectory = Eigen::Vector2d::Zero();

  void check(const CameraIntrinsics& intr) const {
    require(contact.u >= 0 && contact.u < intr.width && contact.v >= 0 && contact.v < intr.height,
            "invalid-input", "affordance contact outside image bounds");
    require(trajectory.norm() > 0, "invalid-input", "affordance trajectory is zero");
  }
};

// Plane spanned by the viewing ray through the contact and the back-projected
// trajectory; every 3D motion consistent with the 2D prediction lies in it.
struct ProjectionPlane {
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  Point3 anchor = Point3::Zero();
};

struct Affordance3D {
  Point3 contact = Point3::Zero();
  Eigen::Vector3d direction = Eigen::Vector3d::UnitX();  // unit, robot base frame
};

// Paper-stated default virtual view: 52 degrees pitch from (0.2, 0, 0.7).
inline CameraExtrinsics default_virtual_camera(const Point3& position = {0.2, 0.0, 0.7},
                                               double pitch_deg = 52.0) {
  const double pitch = pitch_deg * M_PI / 180.0;
  const Eigen::Vector3d forward{std::cos(pitch), 0.0, -std::sin(pitch)};
  const Eigen::Vector3d right = forward.cross(Eigen::Vector3d::UnitZ()).normalized();
  const Eigen::Vector3d down = forward.cross(right);
  RigidTransform cam_in_base;
  cam_in_base.rotation.col(0) = right;
  cam_in_base.rotation.col(1) = down;
  cam_in_base.rotation.col(2) = forward;
  cam_in_base.translation = position;
  return CameraExtrinsics::from_pose(cam_in_base);
}

namespace aff_detail {

// back-projection without the image-bounds check; trajectory endpoints may
// leave the frame
inline Point3 unproject(const PixelCoord& pixel, double depth, const CameraIntrinsics& intr,
                        const CameraExtrinsics& extr) {
  const Point3 cam{(pixel.u - intr.cx) / intr.fx * depth, (pixel.v - intr.cy) / intr.fy * depth,
                   depth};
  return extr.base_to_camera().inverse().apply(cam);
}

}  // namespace aff_detail

// Image-space direction of a 3D direction at a 3D point (projection Jacobian
// applied to the direction).
inline Eigen::Vector2d project_direction(const Point3& point, const Eigen::Vector3d& direction,
                                         const CameraIntrinsics& intr,
                                         const CameraExtrinsics& extr) {
  const RigidTransform base_to_cam = extr.base_to_camera();
  const Point3 p = base_to_cam.apply(point);
  require(p.z() > 0, "out-of-frustum", "point is behind the camera");
  const Eigen::Vector3d d = base_to_cam.rotation * direction;
  return {intr.fx * (d.x() * p.z() - p.x() * d.z()) / (p.z() * p.z()),
          intr.fy * (d.y() * p.z() - p.y() * d.z()) / (p.z() * p.z())};
}

// Forward-warp of masked depth pixels into a second camera with z-buffering.
inline std::pair<DepthMap, Mask> warp_to_virtual_view(const DepthMap& depth, const Mask& mask,
                                                      const CameraIntrinsics& intr,
                                                      const CameraExtrinsics& extr_real,
                                                      const CameraExtrinsics& extr_virtual) {
  require(depth.width == intr.width && depth.height == intr.height && mask.width == depth.width &&
              mask.height == depth.height,
          "invalid-input", "depth/mask/camera dimensions differ");
  DepthMap out = DepthMap::invalid_filled(intr.width, intr.height);
  Mask out_mask = Mask::empty(intr.width, intr.height);
  bool any = false;
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      if (!mask.at(u, v)) continue;
      const double z = depth.at(u, v);
      if (z <= 0) continue;
      const Point3 base = aff_detail::unproject({static_cast<double>(u), static_cast<double>(v)},
                                                z, intr, extr_real);
      const Point3 cam = extr_virtual.base_to_camera().apply(base);
      if (cam.z() <= 0) continue;
      const int pu = static_cast<int>(std::lround(intr.fx * cam.x() / cam.z() + intr.cx));
      const int pv = static_cast<int>(std::lround(intr.fy * cam.y() / cam.z() + intr.cy));
      if (!out.in_bounds(pu, pv)) continue;
      double& cell = out.at(pu, pv);
      if (cell == 0.0 || cam.z() < cell) {
        cell = cam.z();
        out_mask.set(pu, pv, true);
        any = true;
      }
    }
  }
  require(any, "empty-warp", "no masked pixel lands in the virtual frustum");
  return {out, out_mask};
}

// Projection plane of a 2D affordance: the trajectory endpoint is
// back-projected at the contact depth (the endpoints share the same depth by
// construction), the second spanning vector runs from the camera origin to
// the contact.
inline ProjectionPlane plane_from_affordance(const PixelAffordance& aff, double contact_depth,
                                             const CameraIntrinsics& intr,
                                             const CameraExtrinsics& extr) {
  aff.check(intr);
  require(contact_depth > 0, "invalid-depth", "contact depth must be positive");
  const Point3 contact = aff_detail::unproject(aff.contact, contact_depth, intr, extr);
  const Point3 endpoint = aff_detail::unproject(
      {aff.contact.u + aff.trajectory.x(), aff.contact.v + aff.trajectory.y()}, contact_depth,
      intr, extr);
  const Eigen::Vector3d in_plane = endpoint - contact;         // phi
  const Eigen::Vector3d to_contact = contact - extr.origin_in_base();  // phi'
  require(in_plane.norm() > 1e-12, "degenerate-plane",
          "trajectory back-projects to a numerically null displacement");
  const Eigen::Vector3d cross = in_plane.cross(to_contact);
  require(cross.norm() > 1e-12 * in_plane.norm() * to_contact.norm(), "degenerate-plane",
          "trajectory is parallel to the viewing ray");
  ProjectionPlane plane;
  plane.normal = cross.normalized();
  plane.anchor = contact;
  return plane;
}

// 3D post-contact direction: the intersection line of the two projection
// planes, signed so its image-space projection agrees with the real-view
// trajectory.
inline Affordance3D intersect_post_contact(const ProjectionPlane& plane_real,
                                           const ProjectionPlane& plane_virtual,
                                           const PixelAffordance& aff_real,
                                           const CameraIntrinsics& intr,
                                           const CameraExtrinsics& extr_real) {
  const double parallel = std::abs(plane_real.normal.dot(plane_virtual.normal));
  require(parallel < 1.0 - 1e-6, "ill-conditioned-intersection",
          "projection planes are (near) parallel; re-place the virtual camera");
  Affordance3D out;
  out.contact = plane_real.anchor;
  out.direction = plane_real.normal.cross(plane_virtual.normal).normalized();
  const Eigen::Vector2d reprojected =
      project_direction(out.contact, out.direction, intr, extr_real);
  const double agreement = reprojected.dot(aff_real.trajectory);
  require(std::abs(agreement) > 1e-15, "ill-conditioned-intersection",
          "intersection direction projects to a point in the real view");
  if (agreement < 0) out.direction = -out.direction;
  return out;
}

// Depth lookup tolerant of small invalid holes (nearest valid value within a
// 3-pixel window).
inline double depth_near(const DepthMap& depth, const PixelCoord& pixel) {
  const int cu = static_cast<int>(std::lround(pixel.u));
  const int cv = static_cast<int>(std::lround(pixel.v));
  double best = 0.0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (int dv = -3; dv <= 3; ++dv)
    for (int du = -3; du <= 3; ++du) {
      const int u = cu + du, v = cv + dv;
      if (!depth.in_bounds(u, v) || depth.at(u, v) <= 0) continue;
      const double d = du * du + dv * dv;
      if (d < best_dist) {
        best_dist = d;
        best = depth.at(u, v);
      }
    }
  require(best > 0, "invalid-depth", "no valid depth near the affordance contact");
  return best;
}

// End-to-end projection: real + virtual 2D affordances to a 3D contact and
// direction, with the virtual contact depth read from the warped depth map.
inline Affordance3D project_affordance(const DepthMap& depth, const Mask& mask,
                                       const CameraIntrinsics& intr,
                                       const CameraExtrinsics& extr_real,
                                       const CameraExtrinsics& extr_virtual,
                                       const PixelAffordance& aff_real,
                                       const PixelAffordance& aff_virtual) {
  const auto [virtual_depth, virtual_mask] =
      warp_to_virtual_view(depth, mask, intr, extr_real, extr_virtual);
  (void)virtual_mask;
  const double z_real = depth_near(depth, aff_real.contact);
  const double z_virtual = depth_near(virtual_depth, aff_virtual.contact);
  const ProjectionPlane plane_real = plane_from_affordance(aff_real, z_real, intr, extr_real);
  const ProjectionPlane plane_virtual =
      plane_from_affordance(aff_virtual, z_virtual, intr, extr_virtual);
  return intersect_post_contact(plane_real, plane_virtual, aff_real, intr, extr_real);
}

}  // namespace twinforge
