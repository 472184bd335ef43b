#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "twinforge/common.hpp"

namespace twinforge {

using Point3 = Eigen::Vector3d;

inline bool finite(const Point3& p) {
  return std::isfinite(p.x()) && std::isfinite(p.y()) && std::isfinite(p.z());
}

struct PointCloud {
  std::vector<Point3> points;
  std::optional<std::vector<int>> labels;  // per-point part label when present

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  void check() const {
    require(!points.empty(), "invalid-input", "point cloud is empty");
    if (labels) {
      require(labels->size() == points.size(), "invalid-input",
              "label count does not match point count");
    }
  }
};

// Rotation + translation; maps points as R*p + t.
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidTransform identity() { return {}; }

  static RigidTransform from_translation(const Eigen::Vector3d& t) {
    return {Eigen::Matrix3d::Identity(), t};
  }

  // Rotation by `angle` about `axis` through point `origin`.
  static RigidTransform about_axis(const Eigen::Vector3d& axis, double angle,
                                   const Eigen::Vector3d& origin = Eigen::Vector3d::Zero()) {
    RigidTransform out;
    out.rotation = Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
    out.translation = origin - out.rotation * origin;
    return out;
  }

  Point3 apply(const Point3& p) const { return rotation * p + translation; }

  RigidTransform compose(const RigidTransform& rhs) const {
    return {rotation * rhs.rotation, rotation * rhs.translation + translation};
  }

  RigidTransform inverse() const {
    RigidTransform out;
    out.rotation = rotation.transpose();
    out.translation = -(out.rotation * translation);
    return out;
  }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.block<3, 3>(0, 0) = rotation;
    m.block<3, 1>(0, 3) = translation;
    return m;
  }

  static RigidTransform from_matrix(const Eigen::Matrix4d& m) {
    return {m.block<3, 3>(0, 0), m.block<3, 1>(0, 3)};
  }

  bool valid(double tol = 1e-9) const {
    const Eigen::Matrix3d gram = rotation.transpose() * rotation;
    return (gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= tol &&
           std::abs(rotation.determinant() - 1.0) <= tol;
  }
};

struct CameraIntrinsics {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;

  void check() const {
    require(fx > 0 && fy > 0, "invalid-input", "focal lengths must be positive");
    require(cx >= 0 && cx < width && cy >= 0 && cy < height, "invalid-input",
            "principal point outside image");
  }

  Eigen::Matrix3d matrix() const {
    Eigen::Matrix3d k = Eigen::Matrix3d::Identity();
    k(0, 0) = fx;
    k(1, 1) = fy;
    k(0, 2) = cx;
    k(1, 2) = cy;
    return k;
  }
};

// Homogeneous base-to-camera transform H: p_camera = H * p_base.
struct CameraExtrinsics {
  Eigen::Matrix4d matrix = Eigen::Matrix4d::Identity();

  static CameraExtrinsics from_pose(const RigidTransform& camera_in_base) {
    return {camera_in_base.inverse().matrix()};
  }

  RigidTransform base_to_camera() const { return RigidTransform::from_matrix(matrix); }

  // Camera origin expressed in the base frame.
  Point3 origin_in_base() const { return base_to_camera().inverse().translation; }

  void check() const {
    const Eigen::RowVector4d bottom = matrix.row(3);
    require((bottom - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() <= 1e-9,
            "invalid-input", "extrinsic bottom row must be (0,0,0,1)");
    require(base_to_camera().valid(1e-6), "invalid-input",
            "extrinsic rotation block is not orthonormal");
  }
};

struct DepthMap {
  int width = 0, height = 0;
  std::vector<double> values;  // row-major meters, 0 = invalid

  static DepthMap invalid_filled(int w, int h) {
    return {w, h, std::vector<double>(static_cast<std::size_t>(w) * h, 0.0)};
  }

  double at(int u, int v) const { return values[static_cast<std::size_t>(v) * width + u]; }
  double& at(int u, int v) { return values[static_cast<std::size_t>(v) * width + u]; }
  bool in_bounds(int u, int v) const { return u >= 0 && u < width && v >= 0 && v < height; }
};

struct Mask {
  int width = 0, height = 0;
  std::vector<std::uint8_t> bits;  // row-major 0/1

  static Mask empty(int w, int h) {
    return {w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h, 0)};
  }

  bool at(int u, int v) const { return bits[static_cast<std::size_t>(v) * width + u] != 0; }
  void set(int u, int v, bool on) { bits[static_cast<std::size_t>(v) * width + u] = on ? 1 : 0; }
  std::size_t count() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t(1)));
  }
};

// ---------------------------------------------------------------------------
// Exact 3D nearest-neighbor tree. Ties resolve to the lowest target index.
// ---------------------------------------------------------------------------

class KdTree {
 public:
  explicit KdTree(const std::vector<Point3>& points) : points_(points) {
    require(!points.empty(), "invalid-input", "cannot build tree over empty cloud");
    order_.resize(points.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    nodes_.reserve(points.size());
    root_ = build(0, points.size());
  }

  // Returns (index of nearest point, Euclidean distance).
  std::pair<std::size_t, double> nearest(const Point3& query) const {
    Best best;
    search(root_, query, best);
    return {best.index, std::sqrt(best.dist_sq)};
  }

 private:
  struct Node {
    std::size_t point = 0;
    int axis = 0;
    int left = -1, right = -1;
  };

  struct Best {
    double dist_sq = std::numeric_limits<double>::infinity();
    std::size_t index = std::numeric_limits<std::size_t>::max();

    void offer(double d2, std::size_t idx) {
      if (d2 < dist_sq || (d2 == dist_sq && idx < index)) {
        dist_sq = d2;
        index = idx;
      }
    }
  };

  int build(std::size_t lo, std::size_t hi) {
    if (lo >= hi) return -1;
    Eigen::Vector3d mn = points_[order_[lo]], mx = mn;
    for (std::size_t i = lo; i < hi; ++i) {
      mn = mn.cwiseMin(points_[order_[i]]);
      mx = mx.cwiseMax(points_[order_[i]]);
    }
    int axis = 0;
    (mx - mn).maxCoeff(&axis);
    const std::size_t mid = lo + (hi - lo) / 2;
    std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                     [&](std::size_t a, std::size_t b) {
                       const double pa = points_[a][axis], pb = points_[b][axis];
                       if (pa != pb) return pa < pb;
                       return a < b;  // stable under duplicates
                     });
    Node node;
    node.point = order_[mid];
    node.axis = axis;
    const int self = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    const int left = build(lo, mid);
    const int right = build(mid + 1, hi);
    nodes_[self].left = left;
    nodes_[self].right = right;
    return self;
  }

  void search(int node_id, const Point3& query, Best& best) const {
    if (node_id < 0) return;
    const Node& node = nodes_[node_id];
    best.offer((points_[node.point] - query).squaredNorm(), node.point);
    const double delta = query[node.axis] - points_[node.point][node.axis];
    const int near = delta < 0 ? node.left : node.right;
    const int far = delta < 0 ? node.right : node.left;
    search(near, query, best);
    // <= keeps equal-distance candidates reachable so index tie-breaks stay exact
    if (delta * delta <= best.dist_sq) search(far, query, best);
  }

  const std::vector<Point3>& points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

struct NeighborHit {
  std::size_t index = 0;
  double distance = 0.0;
};

inline std::vector<NeighborHit> nearest_neighbors(const PointCloud& query,
                                                  const PointCloud& target) {
  query.check();
  target.check();
  KdTree tree(target.points);
  std::vector<NeighborHit> hits(query.size());
  for (std::size_t i = 0; i < query.size(); ++i) {
    auto [idx, dist] = tree.nearest(query.points[i]);
    hits[i] = {idx, dist};
  }
  return hits;
}

// Distance from each source point to its nearest target point, in source order.
inline std::vector<double> chamfer_directed(const PointCloud& source, const PointCloud& target) {
  source.check();
  target.check();
  KdTree tree(target.points);
  std::vector<double> distances(source.size());
  for (std::size_t i = 0; i < source.size(); ++i) distances[i] = tree.nearest(source.points[i]).second;
  return distances;
}

// Least-squares SE(3) fit of paired points (Kabsch-Umeyama, no scale).
inline RigidTransform fit_rigid_transform(const std::vector<Point3>& source_pts,
                                          const std::vector<Point3>& target_pts) {
  require(source_pts.size() == target_pts.size(), "invalid-input",
          "correspondence lists differ in length");
  require(source_pts.size() >= 3, "invalid-input", "need at least 3 correspondences");

  Eigen::Vector3d src_centroid = Eigen::Vector3d::Zero(), tgt_centroid = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < source_pts.size(); ++i) {
    src_centroid += source_pts[i];
    tgt_centroid += target_pts[i];
  }
  src_centroid /= static_cast<double>(source_pts.size());
  tgt_centroid /= static_cast<double>(target_pts.size());

  Eigen::Matrix3d cross = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < source_pts.size(); ++i)
    cross += (source_pts[i] - src_centroid) * (target_pts[i] - tgt_centroid).transpose();

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sv = svd.singularValues();
  // Rank < 2 leaves a rotation about the point axis undetermined.
  require(sv(1) > 1e-12 * std::max(sv(0), 1e-300), "rank-deficiency",
          "degenerate (collinear or coincident) point configuration");

  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0) d(2, 2) = -1.0;

  RigidTransform out;
  out.rotation = svd.matrixV() * d * svd.matrixU().transpose();
  out.translation = tgt_centroid - out.rotation * src_centroid;
  return out;
}

struct PixelCoord {
  double u = 0, v = 0;
};

// Pixel + depth -> point in the robot base frame (p = H^-1 K^-1 z [u v 1]^T).
inline Point3 back_project(const PixelCoord& pixel, double depth, const CameraIntrinsics& intr,
                           const CameraExtrinsics& extr) {
  require(depth > 0, "invalid-depth", "depth must be positive");
  require(pixel.u >= 0 && pixel.u < intr.width && pixel.v >= 0 && pixel.v < intr.height,
          "invalid-input", "pixel outside image bounds");
  const Point3 cam{(pixel.u - intr.cx) / intr.fx * depth, (pixel.v - intr.cy) / intr.fy * depth,
                   depth};
  return extr.base_to_camera().inverse().apply(cam);
}

struct Projection {
  double u = 0, v = 0, z = 0;  // z is camera-frame depth
};

inline Projection project(const Point3& point, const CameraIntrinsics& intr,
                          const CameraExtrinsics& extr) {
  const Point3 cam = extr.base_to_camera().apply(point);
  require(cam.z() > 0, "out-of-frustum", "point is behind the camera");
  return {intr.fx * cam.x() / cam.z() + intr.cx, intr.fy * cam.y() / cam.z() + intr.cy, cam.z()};
}

}  // namespace twinforge
