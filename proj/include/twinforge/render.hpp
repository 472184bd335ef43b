#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "twinforge/geometry.hpp"
#include "twinforge/io.hpp"

namespace twinforge {

struct RenderResult {
  DepthMap depth;
  Mask mask;
};

namespace detail {

// Pixel (u, v) samples the continuous image point (u, v); this matches
// back_project/project so rendered depths back-project onto the surface.
inline void rasterize_triangle(const Point3& a, const Point3& b, const Point3& c,
                               const CameraIntrinsics& intr, DepthMap& depth, Mask& mask) {
  if (a.z() <= 1e-9 || b.z() <= 1e-9 || c.z() <= 1e-9) return;  // no near-plane clipping
  const double au = intr.fx * a.x() / a.z() + intr.cx, av = intr.fy * a.y() / a.z() + intr.cy;
  const double bu = intr.fx * b.x() / b.z() + intr.cx, bv = intr.fy * b.y() / b.z() + intr.cy;
  const double cu = intr.fx * c.x() / c.z() + intr.cx, cv = intr.fy * c.y() / c.z() + intr.cy;

  const double area = (bu - au) * (cv - av) - (bv - av) * (cu - au);
  if (std::abs(area) < 1e-12) return;

  const int min_u = std::max(0, static_cast<int>(std::ceil(std::min({au, bu, cu}))));
  const int max_u = std::min(intr.width - 1, static_cast<int>(std::floor(std::max({au, bu, cu}))));
  const int min_v = std::max(0, static_cast<int>(std::ceil(std::min({av, bv, cv}))));
  const int max_v = std::min(intr.height - 1, static_cast<int>(std::floor(std::max({av, bv, cv}))));
  if (min_u > max_u || min_v > max_v) return;

  const double inv_za = 1.0 / a.z(), inv_zb = 1.0 / b.z(), inv_zc = 1.0 / c.z();
  for (int v = min_v; v <= max_v; ++v) {
    for (int u = min_u; u <= max_u; ++u) {
      const double w0 = ((bu - u) * (cv - v) - (bv - v) * (cu - u)) / area;
      const double w1 = ((cu - u) * (av - v) - (cv - v) * (au - u)) / area;
      const double w2 = 1.0 - w0 - w1;
      const double eps = 1e-12;
      if (w0 < -eps || w1 < -eps || w2 < -eps) continue;
      // perspective-correct: 1/z is affine in screen space, exact for planar faces
      const double z = 1.0 / (w0 * inv_za + w1 * inv_zb + w2 * inv_zc);
      double& cell = depth.at(u, v);
      if (cell == 0.0 || z < cell) {
        cell = z;
        mask.set(u, v, true);
      }
    }
  }
}

}  // namespace detail

// Software z-buffer rasterization of camera-frame triangles.
inline RenderResult render_triangles_camera_frame(const std::vector<Point3>& vertices,
                                                  const std::vector<std::array<int, 3>>& triangles,
                                                  const CameraIntrinsics& intr) {
  intr.check();
  RenderResult out{DepthMap::invalid_filled(intr.width, intr.height),
                   Mask::empty(intr.width, intr.height)};
  for (const auto& tri : triangles)
    detail::rasterize_triangle(vertices[static_cast<std::size_t>(tri[0])],
                               vertices[static_cast<std::size_t>(tri[1])],
                               vertices[static_cast<std::size_t>(tri[2])], intr, out.depth,
                               out.mask);
  return out;
}

// Renders a mesh under `pose` (model-to-camera) and uniform `scale`.
inline RenderResult render_depth(const TriMesh& mesh, const RigidTransform& pose, double scale,
                                 const CameraIntrinsics& intr) {
  require(!mesh.vertices.empty() && !mesh.triangles.empty(), "invalid-input", "mesh is empty");
  require(scale > 0, "invalid-input", "scale must be positive");
  std::vector<Point3> cam(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i)
    cam[i] = pose.apply(scale * mesh.vertices[i]);
  return render_triangles_camera_frame(cam, mesh.triangles, intr);
}

}  // namespace twinforge
