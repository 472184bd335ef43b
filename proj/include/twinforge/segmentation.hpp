#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <set>
#include <vector>

#include "twinforge/geometry.hpp"

namespace twinforge {

struct SubPart {
  int id = 0;
  std::vector<std::size_t> point_indices;
};

struct SubPartGraph {
  std::vector<SubPart> nodes;
  std::vector<std::pair<int, int>> edges;  // undirected, a < b

  std::vector<std::vector<int>> adjacency() const {
    std::vector<std::vector<int>> adj(nodes.size());
    for (const auto& [a, b] : edges) {
      adj[static_cast<std::size_t>(a)].push_back(b);
      adj[static_cast<std::size_t>(b)].push_back(a);
    }
    for (auto& list : adj) std::sort(list.begin(), list.end());
    return adj;
  }
};

struct MovedCriterion {
  double distance_threshold = 0.01;               // meters
  double distribution_statistic_threshold = 0.4;  // two-sample KS statistic

  void check() const {
    require(distance_threshold > 0 && distribution_statistic_threshold > 0, "invalid-input",
            "moved-criterion thresholds must be positive");
  }
};

struct SegmentationLabels {
  std::vector<int> labels;  // per point of the final frame, 0 = root
};

namespace seg_detail {

// Uniform voxel hash for fixed-radius neighbor queries.
class VoxelGrid {
 public:
  VoxelGrid(const std::vector<Point3>& points, double cell) : points_(points), cell_(cell) {
    for (std::size_t i = 0; i < points.size(); ++i) cells_[key(points[i])].push_back(i);
  }

  template <typename Fn>
  void for_neighbors(const Point3& query, double radius, Fn&& fn) const {
    const double r2 = radius * radius;
    const auto center = key(query);
    const int reach = static_cast<int>(std::ceil(radius / cell_));
    for (int dx = -reach; dx <= reach; ++dx)
      for (int dy = -reach; dy <= reach; ++dy)
        for (int dz = -reach; dz <= reach; ++dz) {
          const auto it = cells_.find({center[0] + dx, center[1] + dy, center[2] + dz});
          if (it == cells_.end()) continue;
          for (std::size_t idx : it->second)
            if ((points_[idx] - query).squaredNorm() <= r2) fn(idx);
        }
  }

 private:
  std::array<int, 3> key(const Point3& p) const {
    return {static_cast<int>(std::floor(p.x() / cell_)),
            static_cast<int>(std::floor(p.y() / cell_)),
            static_cast<int>(std::floor(p.z() / cell_))};
  }

  const std::vector<Point3>& points_;
  double cell_;
  std::map<std::array<int, 3>, std::vector<std::size_t>> cells_;
};

}  // namespace seg_detail

// Euclidean region growing at the given radius; deterministic because seeds
// are taken in index order. Fallback sub-part oracle for when no external
// proposals are available; over-segmentation is fine downstream.
inline std::vector<SubPart> cluster_subparts(const PointCloud& cloud, double radius) {
  cloud.check();
  require(radius > 0, "invalid-input", "cluster radius must be positive");
  seg_detail::VoxelGrid grid(cloud.points, radius);
  std::vector<int> component(cloud.size(), -1);
  std::vector<SubPart> subparts;
  for (std::size_t seed = 0; seed < cloud.size(); ++seed) {
    if (component[seed] >= 0) continue;
    SubPart part;
    part.id = static_cast<int>(subparts.size());
    std::deque<std::size_t> frontier{seed};
    component[seed] = part.id;
    while (!frontier.empty()) {
      const std::size_t current = frontier.front();
      frontier.pop_front();
      part.point_indices.push_back(current);
      grid.for_neighbors(cloud.points[current], radius, [&](std::size_t neighbor) {
        if (component[neighbor] < 0) {
          component[neighbor] = part.id;
          frontier.push_back(neighbor);
        }
      });
    }
    std::sort(part.point_indices.begin(), part.point_indices.end());
    subparts.push_back(std::move(part));
  }
  return subparts;
}

// Edge between two sub-parts iff their minimum inter-point distance is below
// adjacency_radius.
inline SubPartGraph build_subpart_graph(const PointCloud& cloud,
                                        const std::vector<SubPart>& subparts,
                                        double adjacency_radius) {
  cloud.check();
  require(adjacency_radius > 0, "invalid-input", "adjacency radius must be positive");
  std::vector<int> owner(cloud.size(), -1);
  for (const SubPart& part : subparts)
    for (std::size_t idx : part.point_indices) {
      require(idx < cloud.size() && owner[idx] < 0, "invalid-input",
              "sub-parts must partition the cloud");
      owner[idx] = part.id;
    }
  for (int o : owner) require(o >= 0, "invalid-input", "sub-parts must cover the cloud");

  seg_detail::VoxelGrid grid(cloud.points, adjacency_radius);
  std::set<std::pair<int, int>> edges;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    grid.for_neighbors(cloud.points[i], adjacency_radius, [&](std::size_t j) {
      const int a = owner[i], b = owner[static_cast<std::size_t>(j)];
      if (a == b) return;
      edges.insert({std::min(a, b), std::max(a, b)});
    });
  }
  SubPartGraph graph;
  graph.nodes = subparts;
  graph.edges.assign(edges.begin(), edges.end());
  return graph;
}

// Sub-part containing the point nearest to the contact; ties go to the lowest id.
inline int closest_subpart(const std::vector<SubPart>& subparts, const PointCloud& cloud,
                           const Point3& contact) {
  cloud.check();
  require(finite(contact), "invalid-input", "contact point must be finite");
  require(!subparts.empty(), "invalid-input", "no sub-parts given");
  double best = std::numeric_limits<double>::infinity();
  int best_id = -1;
  for (const SubPart& part : subparts) {
    for (std::size_t idx : part.point_indices) {
      const double d2 = (cloud.points[idx] - contact).squaredNorm();
      if (d2 < best) {
        best = d2;
        best_id = part.id;
      }
    }
  }
  return best_id;
}

// Two-sample Kolmogorov-Smirnov statistic: sup_x |F1(x) - F2(x)|.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
  require(!a.empty() && !b.empty(), "invalid-input", "ks statistic needs non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t ia = 0, ib = 0;
  double d = 0.0;
  while (ia < a.size() && ib < b.size()) {
    const double x = std::min(a[ia], b[ib]);
    while (ia < a.size() && a[ia] <= x) ++ia;
    while (ib < b.size() && b[ib] <= x) ++ib;
    const double fa = static_cast<double>(ia) / static_cast<double>(a.size());
    const double fb = static_cast<double>(ib) / static_cast<double>(b.size());
    d = std::max(d, std::abs(fa - fb));
  }
  return d;
}

struct MovedResult {
  bool moved = false;
  std::vector<double> forward;   // sub-part -> previous frame
  std::vector<double> backward;  // matched previous points -> current frame
};

namespace seg_detail {

inline MovedResult is_moved_with_trees(const PointCloud& subpart_cloud,
                                       const PointCloud& prev_frame, const KdTree& prev_tree,
                                       const KdTree& cur_tree, const MovedCriterion& crit) {
  MovedResult out;
  out.forward.resize(subpart_cloud.size());
  PointCloud matched_prev;
  matched_prev.points.resize(subpart_cloud.size());
  for (std::size_t i = 0; i < subpart_cloud.size(); ++i) {
    const auto [idx, dist] = prev_tree.nearest(subpart_cloud.points[i]);
    out.forward[i] = dist;
    matched_prev.points[i] = prev_frame.points[idx];
  }
  out.backward.resize(matched_prev.size());
  for (std::size_t i = 0; i < matched_prev.size(); ++i)
    out.backward[i] = cur_tree.nearest(matched_prev.points[i]).second;

  double mean_forward = 0.0;
  for (double d : out.forward) mean_forward += d;
  mean_forward /= static_cast<double>(out.forward.size());
  out.moved = mean_forward > crit.distance_threshold ||
              ks_statistic(out.forward, out.backward) > crit.distribution_statistic_threshold;
  return out;
}

}  // namespace seg_detail

// Moved test for one sub-part between consecutive frames: the forward chamfer
// mean exceeds the threshold, or the forward/backward distance distributions
// differ (KS statistic).
inline MovedResult is_moved(const PointCloud& subpart_cloud, const PointCloud& prev_frame,
                            const PointCloud& cur_frame, const MovedCriterion& crit) {
  subpart_cloud.check();
  prev_frame.check();
  cur_frame.check();
  crit.check();
  const KdTree prev_tree(prev_frame.points);
  const KdTree cur_tree(cur_frame.points);
  return seg_detail::is_moved_with_trees(subpart_cloud, prev_frame, prev_tree, cur_tree, crit);
}

struct SegmentationResult {
  SegmentationLabels final_labels;              // labels of the last frame
  std::vector<std::vector<int>> frame_labels;   // labels per frame 0..K
};

// Movable part segmentation over K+1 frames: breadth-first sweep of the
// sub-part graph from the sub-part closest to the interaction contact; a
// sub-part takes label k only if its points moved AND it is connected to the
// contact through already-moved sub-parts; everything else inherits the label
// of its nearest point in the previous frame.
inline SegmentationResult segment_movable_parts(
    const std::vector<PointCloud>& frames, const std::vector<std::vector<SubPart>>& subparts,
    const std::vector<Point3>& contacts, const MovedCriterion& crit,
    double adjacency_radius = 0.02) {
  require(frames.size() >= 1, "invalid-input", "need at least one frame");
  require(contacts.size() + 1 == frames.size(), "invalid-input",
          "need exactly K contacts for K+1 frames");
  require(subparts.size() == frames.size(), "invalid-input",
          "need sub-part proposals for every frame");
  crit.check();
  for (const PointCloud& frame : frames) frame.check();

  SegmentationResult result;
  result.frame_labels.resize(frames.size());
  result.frame_labels[0].assign(frames[0].size(), 0);

  for (std::size_t k = 1; k < frames.size(); ++k) {
    const PointCloud& cur = frames[k];
    const PointCloud& prev = frames[k - 1];
    const std::vector<int>& prev_labels = result.frame_labels[k - 1];
    const KdTree prev_tree(prev.points);
    const KdTree cur_tree(cur.points);

    const SubPartGraph graph = build_subpart_graph(cur, subparts[k], adjacency_radius);
    const auto adjacency = graph.adjacency();
    const int root = closest_subpart(subparts[k], cur, contacts[k - 1]);

    std::vector<int>& labels = result.frame_labels[k];
    labels.assign(cur.size(), 0);
    std::vector<std::uint8_t> visited(graph.nodes.size(), 0);
    std::vector<std::uint8_t> labeled_moved(graph.nodes.size(), 0);

    auto process = [&](int node_id, bool eligible) {
      const SubPart& node = graph.nodes[static_cast<std::size_t>(node_id)];
      PointCloud sub;
      sub.points.reserve(node.point_indices.size());
      for (std::size_t idx : node.point_indices) sub.points.push_back(cur.points[idx]);
      const MovedResult moved = seg_detail::is_moved_with_trees(sub, prev, prev_tree, cur_tree, crit);
      if (moved.moved && eligible) {
        labeled_moved[static_cast<std::size_t>(node_id)] = 1;
        for (std::size_t idx : node.point_indices) labels[idx] = static_cast<int>(k);
      } else {
        for (std::size_t idx : node.point_indices) {
          const auto [prev_idx, dist] = prev_tree.nearest(cur.points[idx]);
          (void)dist;
          labels[idx] = prev_labels[prev_idx];
        }
      }
      visited[static_cast<std::size_t>(node_id)] = 1;
    };

    // breadth-first from the contact sub-part, neighbors in ascending id order
    std::deque<int> frontier{root};
    std::vector<std::uint8_t> queued(graph.nodes.size(), 0);
    queued[static_cast<std::size_t>(root)] = 1;
    while (!frontier.empty()) {
      const int node_id = frontier.front();
      frontier.pop_front();
      bool eligible = node_id == root;
      for (int neighbor : adjacency[static_cast<std::size_t>(node_id)])
        if (visited[static_cast<std::size_t>(neighbor)] &&
            labeled_moved[static_cast<std::size_t>(neighbor)])
          eligible = true;
      process(node_id, eligible);
      for (int neighbor : adjacency[static_cast<std::size_t>(node_id)]) {
        if (queued[static_cast<std::size_t>(neighbor)]) continue;
        queued[static_cast<std::size_t>(neighbor)] = 1;
        frontier.push_back(neighbor);
      }
    }
    // components unreachable from the contact cannot satisfy the predecessor
    // rule; they inherit
    for (std::size_t node_id = 0; node_id < graph.nodes.size(); ++node_id)
      if (!visited[node_id]) process(static_cast<int>(node_id), false);
  }

  result.final_labels.labels = result.frame_labels.back();
  return result;
}

}  // namespace twinforge
