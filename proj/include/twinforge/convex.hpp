#pragma once

#include <array>
#include <cmath>
#include <deque>
#include <map>
#include <vector>

#include "twinforge/geometry.hpp"
#include "twinforge/io.hpp"

namespace twinforge {

// Incremental quickhull. Output triangles are outward-oriented. Desk-scale
// inputs only; robustness comes from a scale-relative epsilon, not exact
// arithmetic.
inline TriMesh convex_hull(const std::vector<Point3>& input) {
  require(input.size() >= 4, "degenerate-geometry", "convex hull needs at least 4 points");

  Point3 lo = input[0], hi = input[0];
  for (const Point3& p : input) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double eps = 1e-9 * std::max((hi - lo).norm(), 1e-9);

  // initial simplex: extreme point, farthest point, farthest from the line,
  // farthest from the plane
  std::size_t i0 = 0, i1 = 0;
  for (std::size_t a = 1; a < input.size(); ++a)
    if (input[a].x() < input[i0].x()) i0 = a;
  double best = -1;
  for (std::size_t a = 0; a < input.size(); ++a) {
    const double d = (input[a] - input[i0]).squaredNorm();
    if (d > best) {
      best = d;
      i1 = a;
    }
  }
  require(best > eps * eps, "degenerate-geometry", "all points coincide");
  std::size_t i2 = 0;
  best = -1;
  const Eigen::Vector3d dir = (input[i1] - input[i0]).normalized();
  for (std::size_t a = 0; a < input.size(); ++a) {
    const Eigen::Vector3d rel = input[a] - input[i0];
    const double d = (rel - rel.dot(dir) * dir).squaredNorm();
    if (d > best) {
      best = d;
      i2 = a;
    }
  }
  require(best > eps * eps, "degenerate-geometry", "points are collinear");
  std::size_t i3 = 0;
  best = -1;
  const Eigen::Vector3d plane_n = (input[i1] - input[i0]).cross(input[i2] - input[i0]).normalized();
  for (std::size_t a = 0; a < input.size(); ++a) {
    const double d = std::abs(plane_n.dot(input[a] - input[i0]));
    if (d > best) {
      best = d;
      i3 = a;
    }
  }
  require(best > eps, "degenerate-geometry", "points are coplanar");

  struct Face {
    std::array<std::size_t, 3> v;
    Eigen::Vector3d normal;
    double offset = 0;
    std::vector<std::size_t> outside;
    bool alive = true;
  };
  std::vector<Face> faces;

  const Point3 interior = (input[i0] + input[i1] + input[i2] + input[i3]) / 4.0;
  auto add_face = [&](std::size_t a, std::size_t b, std::size_t c) {
    Face face;
    face.v = {a, b, c};
    face.normal = (input[b] - input[a]).cross(input[c] - input[a]);
    const double norm = face.normal.norm();
    if (norm < eps * eps) {
      face.normal = Eigen::Vector3d::Zero();
    } else {
      face.normal /= norm;
    }
    face.offset = face.normal.dot(input[a]);
    if (face.normal.dot(interior) - face.offset > 0) {  // flip outward
      std::swap(face.v[1], face.v[2]);
      face.normal = -face.normal;
      face.offset = -face.offset;
    }
    faces.push_back(std::move(face));
    return faces.size() - 1;
  };

  add_face(i0, i1, i2);
  add_face(i0, i1, i3);
  add_face(i0, i2, i3);
  add_face(i1, i2, i3);

  auto assign_outside = [&](const std::vector<std::size_t>& candidates) {
    for (std::size_t p : candidates) {
      double farthest = eps;
      std::size_t target = faces.size();
      for (std::size_t f = 0; f < faces.size(); ++f) {
        if (!faces[f].alive) continue;
        const double d = faces[f].normal.dot(input[p]) - faces[f].offset;
        if (d > farthest) {
          farthest = d;
          target = f;
        }
      }
      if (target < faces.size()) faces[target].outside.push_back(p);
    }
  };
  {
    std::vector<std::size_t> all(input.size());
    for (std::size_t p = 0; p < input.size(); ++p) all[p] = p;
    assign_outside(all);
  }

  for (;;) {
    // face with a pending outside point
    std::size_t face_id = faces.size();
    for (std::size_t f = 0; f < faces.size(); ++f)
      if (faces[f].alive && !faces[f].outside.empty()) {
        face_id = f;
        break;
      }
    if (face_id == faces.size()) break;

    const Face& face = faces[face_id];
    std::size_t apex = face.outside[0];
    double farthest = -1;
    for (std::size_t p : face.outside) {
      const double d = face.normal.dot(input[p]) - face.offset;
      if (d > farthest) {
        farthest = d;
        apex = p;
      }
    }

    // visible set and horizon
    std::vector<std::size_t> visible;
    for (std::size_t f = 0; f < faces.size(); ++f)
      if (faces[f].alive && faces[f].normal.dot(input[apex]) - faces[f].offset > eps)
        visible.push_back(f);

    std::map<std::pair<std::size_t, std::size_t>, int> edge_count;
    auto edge_key = [](std::size_t a, std::size_t b) {
      return std::make_pair(std::min(a, b), std::max(a, b));
    };
    for (std::size_t f : visible)
      for (int e = 0; e < 3; ++e)
        edge_count[edge_key(faces[f].v[static_cast<std::size_t>(e)],
                            faces[f].v[static_cast<std::size_t>((e + 1) % 3)])]++;

    std::vector<std::size_t> orphans;
    for (std::size_t f : visible) {
      faces[f].alive = false;
      for (std::size_t p : faces[f].outside)
        if (p != apex) orphans.push_back(p);
      faces[f].outside.clear();
    }
    for (std::size_t f : visible) {
      const Face dead = faces[f];
      for (int e = 0; e < 3; ++e) {
        const std::size_t a = dead.v[static_cast<std::size_t>(e)];
        const std::size_t b = dead.v[static_cast<std::size_t>((e + 1) % 3)];
        if (edge_count[edge_key(a, b)] == 1) add_face(a, b, apex);  // horizon edge
      }
    }
    assign_outside(orphans);
  }

  // compact to the used vertices
  std::map<std::size_t, int> vertex_map;
  TriMesh hull;
  for (const Face& face : faces) {
    if (!face.alive) continue;
    std::array<int, 3> tri{};
    for (int e = 0; e < 3; ++e) {
      const std::size_t v = face.v[static_cast<std::size_t>(e)];
      auto it = vertex_map.find(v);
      if (it == vertex_map.end()) {
        it = vertex_map.emplace(v, static_cast<int>(hull.vertices.size())).first;
        hull.vertices.push_back(input[v]);
      }
      tri[static_cast<std::size_t>(e)] = it->second;
    }
    hull.triangles.push_back(tri);
  }
  return hull;
}

// Signed distance from a point to a convex triangle mesh: negative inside.
// For interior points the nearest boundary point lies on a face plane, so the
// max of signed plane distances is exact for convex input.
struct ConvexDistance {
  double signed_distance = 0;
  Point3 closest;            // closest surface point
  Eigen::Vector3d normal;    // outward surface normal at the closest point
};

namespace convex_detail {

inline Point3 closest_point_on_triangle(const Point3& p, const Point3& a, const Point3& b,
                                        const Point3& c) {
  // Ericson, Real-Time Collision Detection
  const Eigen::Vector3d ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return a;
  const Eigen::Vector3d bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + (d1 / (d1 - d3)) * ab;
  const Eigen::Vector3d cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + (d2 / (d2 - d6)) * ac;
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return b + w * (c - b);
  }
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

}  // namespace convex_detail

// Precomputed face planes for repeated queries against one convex piece.
class ConvexShape {
 public:
  explicit ConvexShape(const TriMesh& mesh) : mesh_(mesh) {
    require(!mesh.vertices.empty() && !mesh.triangles.empty(), "invalid-input",
            "convex shape needs geometry");
    Point3 centroid = Point3::Zero();
    for (const Point3& v : mesh.vertices) centroid += v;
    centroid /= static_cast<double>(mesh.vertices.size());
    lo_ = hi_ = mesh.vertices[0];
    for (const Point3& v : mesh.vertices) {
      lo_ = lo_.cwiseMin(v);
      hi_ = hi_.cwiseMax(v);
    }
    for (const auto& tri : mesh.triangles) {
      const Point3& a = mesh.vertices[static_cast<std::size_t>(tri[0])];
      const Point3& b = mesh.vertices[static_cast<std::size_t>(tri[1])];
      const Point3& c = mesh.vertices[static_cast<std::size_t>(tri[2])];
      Eigen::Vector3d n = (b - a).cross(c - a);
      const double len = n.norm();
      if (len < 1e-18) continue;
      n /= len;
      if (n.dot(centroid - a) > 0) n = -n;  // outward
      normals_.push_back(n);
      offsets_.push_back(n.dot(a));
      tris_.push_back(tri);
    }
    require(!tris_.empty(), "invalid-input", "convex shape has no non-degenerate faces");
  }

  const Point3& aabb_lo() const { return lo_; }
  const Point3& aabb_hi() const { return hi_; }

  // conservative distance from a point to the axis-aligned bounding box
  double aabb_distance(const Point3& p) const {
    const Eigen::Vector3d d = (lo_ - p).cwiseMax(p - hi_).cwiseMax(0.0);
    return d.norm();
  }

  ConvexDistance distance(const Point3& p) const {
    double max_plane = -std::numeric_limits<double>::infinity();
    std::size_t max_face = 0;
    bool inside = true;
    for (std::size_t f = 0; f < normals_.size(); ++f) {
      const double d = normals_[f].dot(p) - offsets_[f];
      if (d > max_plane) {
        max_plane = d;
        max_face = f;
      }
      if (d > 0) inside = false;
    }
    ConvexDistance out;
    if (inside) {
      out.signed_distance = max_plane;  // negative
      out.normal = normals_[max_face];
      out.closest = p - max_plane * normals_[max_face];
      return out;
    }
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t f = 0; f < tris_.size(); ++f) {
      const Point3 q = convex_detail::closest_point_on_triangle(
          p, mesh_.vertices[static_cast<std::size_t>(tris_[f][0])],
          mesh_.vertices[static_cast<std::size_t>(tris_[f][1])],
          mesh_.vertices[static_cast<std::size_t>(tris_[f][2])]);
      const double d = (p - q).squaredNorm();
      if (d < best) {
        best = d;
        out.closest = q;
        out.normal = normals_[f];
      }
    }
    out.signed_distance = std::sqrt(best);
    const Eigen::Vector3d away = p - out.closest;
    if (away.norm() > 1e-12) out.normal = away.normalized();
    return out;
  }

 private:
  TriMesh mesh_;
  Point3 lo_, hi_;
  std::vector<Eigen::Vector3d> normals_;
  std::vector<double> offsets_;
  std::vector<std::array<int, 3>> tris_;
};

}  // namespace twinforge
