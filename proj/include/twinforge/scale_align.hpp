#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "twinforge/geometry.hpp"
#include "twinforge/render.hpp"

namespace twinforge {

// Candidate object placement: yaw about the world z axis plus a world-frame
// translation. Scale stays 1.0 until estimated from depth sums.
struct PoseHypothesis {
  double yaw = 0.0;
  Point3 translation = Point3::Zero();
  double scale = 1.0;
  double score = 0.0;  // silhouette IoU in [0, 1]
};

inline double mask_iou(const Mask& a, const Mask& b) {
  require(a.width == b.width && a.height == b.height, "invalid-input", "mask sizes differ");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    const bool pa = a.bits[i] != 0, pb = b.bits[i] != 0;
    inter += pa && pb;
    uni += pa || pb;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// Model-to-camera transform of a hypothesis.
inline RigidTransform hypothesis_pose(const PoseHypothesis& hyp, const CameraExtrinsics& extr) {
  RigidTransform world;
  world.rotation = Eigen::AngleAxisd(hyp.yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  world.translation = hyp.translation;
  return extr.base_to_camera().compose(world);
}

// Eq.-style closed-form scale: ratio of masked depth sums. Pixels invalid in
// either map are excluded.
inline double estimate_scale(const DepthMap& observed, const DepthMap& rendered,
                             const Mask& mask) {
  require(observed.width == rendered.width && observed.height == rendered.height &&
              observed.width == mask.width && observed.height == mask.height,
          "invalid-input", "depth/mask dimensions differ");
  double numerator = 0.0, denominator = 0.0;
  bool any = false;
  for (int v = 0; v < mask.height; ++v)
    for (int u = 0; u < mask.width; ++u) {
      if (!mask.at(u, v)) continue;
      const double d_obs = observed.at(u, v);
      const double d_ren = rendered.at(u, v);
      if (d_obs <= 0 || d_ren <= 0) continue;
      numerator += d_obs;
      denominator += d_ren;
      any = true;
    }
  require(any && denominator > 0, "invalid-render",
          "no masked pixel is valid in both depth maps");
  return numerator / denominator;
}

// Silhouette search: uniform yaw grid seeded from the mask centroid
// back-projected at the median masked depth, then coordinate descent with
// step halving on (yaw, tx, ty, tz). Deterministic; only strict improvements
// are accepted, so the score is nondecreasing round over round.
inline PoseHypothesis search_pose(const TriMesh& mesh, const Mask& observed_mask,
                                  const DepthMap& observed_depth, const CameraIntrinsics& intr,
                                  const CameraExtrinsics& extr, int yaw_samples = 72,
                                  int refine_steps = 20,
                                  std::vector<double>* round_scores = nullptr) {
  require(yaw_samples >= 1 && refine_steps >= 0, "invalid-input", "bad search parameters");
  require(observed_mask.count() > 0, "invalid-input", "observed mask is empty");

  // translation seed
  double sum_u = 0, sum_v = 0;
  std::vector<double> masked_depths;
  for (int v = 0; v < observed_mask.height; ++v)
    for (int u = 0; u < observed_mask.width; ++u) {
      if (!observed_mask.at(u, v)) continue;
      sum_u += u;
      sum_v += v;
      if (observed_depth.at(u, v) > 0) masked_depths.push_back(observed_depth.at(u, v));
    }
  require(!masked_depths.empty(), "invalid-input", "no valid depth under the mask");
  const double n = static_cast<double>(observed_mask.count());
  std::nth_element(masked_depths.begin(), masked_depths.begin() + masked_depths.size() / 2,
                   masked_depths.end());
  const double median_depth = masked_depths[masked_depths.size() / 2];
  const Point3 seed = back_project({sum_u / n, sum_v / n}, median_depth, intr, extr);

  // IoU is pixel-quantized and plateaus near the optimum; a scale-free depth
  // residual (observed vs Eq.-5-rescaled render) breaks ties so the descent
  // keeps converging sub-pixel.
  struct Score {
    double iou = -1.0;
    double depth_residual = std::numeric_limits<double>::infinity();
    bool operator>(const Score& rhs) const {
      if (iou != rhs.iou) return iou > rhs.iou;
      return depth_residual < rhs.depth_residual;
    }
  };
  auto score_of = [&](const PoseHypothesis& hyp) {
    const RenderResult render = render_depth(mesh, hypothesis_pose(hyp, extr), hyp.scale, intr);
    Score score;
    score.iou = mask_iou(render.mask, observed_mask);
    double sum_obs = 0, sum_ren = 0;
    std::size_t overlap = 0;
    for (int v = 0; v < observed_mask.height; ++v)
      for (int u = 0; u < observed_mask.width; ++u) {
        if (!observed_mask.at(u, v) || !render.mask.at(u, v)) continue;
        if (observed_depth.at(u, v) <= 0) continue;
        sum_obs += observed_depth.at(u, v);
        sum_ren += render.depth.at(u, v);
        ++overlap;
      }
    if (overlap > 0 && sum_ren > 0) {
      const double ratio = sum_obs / sum_ren;
      double residual = 0;
      for (int v = 0; v < observed_mask.height; ++v)
        for (int u = 0; u < observed_mask.width; ++u) {
          if (!observed_mask.at(u, v) || !render.mask.at(u, v)) continue;
          if (observed_depth.at(u, v) <= 0) continue;
          residual += std::abs(observed_depth.at(u, v) - ratio * render.depth.at(u, v));
        }
      score.depth_residual = residual / static_cast<double>(overlap);
    }
    return score;
  };

  const Eigen::Matrix3d cam_axes = extr.base_to_camera().inverse().rotation;
  auto refine = [&](PoseHypothesis hyp, Score hyp_score, std::vector<double>* trace) {
    // translation steps along the camera axes: in-image shifts plus motion
    // along the viewing ray (which mostly rescales the silhouette)
    double yaw_step = M_PI / yaw_samples;
    double t_step = 0.04;
    for (int round = 0; round < refine_steps; ++round) {
      // keep sweeping at the current step while it pays off, then halve
      for (int sweep = 0; sweep < 64; ++sweep) {
        bool improved = false;
        for (int coord = 0; coord < 4; ++coord) {
          for (double direction : {+1.0, -1.0}) {
            PoseHypothesis trial = hyp;
            if (coord == 0)
              trial.yaw += direction * yaw_step;
            else
              trial.translation += direction * t_step * cam_axes.col(coord - 1);
            const Score trial_score = score_of(trial);
            if (trial_score > hyp_score) {
              hyp = trial;
              hyp_score = trial_score;
              improved = true;
            }
          }
        }
        if (!improved) break;
      }
      if (trace) trace->push_back(hyp_score.iou);
      yaw_step *= 0.5;
      t_step *= 0.5;
    }
    hyp.score = hyp_score.iou;
    return std::make_pair(hyp, hyp_score);
  };

  // Per-candidate translation de-biasing: shift laterally until the rendered
  // centroid matches the observed one and move along the viewing ray until
  // the silhouette areas agree. Without this the yaw ranking at a biased
  // seed is meaningless.
  double obs_cu = 0, obs_cv = 0;
  for (int v = 0; v < observed_mask.height; ++v)
    for (int u = 0; u < observed_mask.width; ++u)
      if (observed_mask.at(u, v)) {
        obs_cu += u;
        obs_cv += v;
      }
  obs_cu /= n;
  obs_cv /= n;
  const RigidTransform base_to_cam = extr.base_to_camera();
  auto align_translation = [&](PoseHypothesis hyp) {
    for (int iteration = 0; iteration < 3; ++iteration) {
      const RenderResult render = render_depth(mesh, hypothesis_pose(hyp, extr), hyp.scale, intr);
      const std::size_t count = render.mask.count();
      if (count == 0) return hyp;
      double cu = 0, cv = 0;
      for (int v = 0; v < render.mask.height; ++v)
        for (int u = 0; u < render.mask.width; ++u)
          if (render.mask.at(u, v)) {
            cu += u;
            cv += v;
          }
      cu /= static_cast<double>(count);
      cv /= static_cast<double>(count);
      const double z_cam = std::max(base_to_cam.apply(hyp.translation).z(), 0.05);
      hyp.translation += ((obs_cu - cu) * z_cam / intr.fx) * cam_axes.col(0);
      hyp.translation += ((obs_cv - cv) * z_cam / intr.fy) * cam_axes.col(1);
      const double area_factor = std::sqrt(static_cast<double>(count) / n);
      hyp.translation += (area_factor - 1.0) * z_cam * cam_axes.col(2);
    }
    return hyp;
  };

  // yaw grid, each candidate at its own de-biased translation; the best few
  // candidates each get the full refinement (a single bad seed pose must not
  // lock in a wrong yaw)
  std::vector<std::pair<Score, PoseHypothesis>> grid;
  for (int i = 0; i < yaw_samples; ++i) {
    PoseHypothesis hyp;
    hyp.yaw = 2.0 * M_PI * i / yaw_samples;
    hyp.translation = seed;
    hyp = align_translation(hyp);
    grid.emplace_back(score_of(hyp), hyp);
  }
  std::stable_sort(grid.begin(), grid.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });

  const std::size_t candidates = std::min<std::size_t>(grid.size(), refine_steps > 0 ? 3 : 1);
  PoseHypothesis best = grid[0].second;
  Score best_score = grid[0].first;
  best.score = best_score.iou;
  for (std::size_t c = 0; c < candidates; ++c) {
    auto [hyp, score] = refine(grid[c].second, grid[c].first, c == 0 ? round_scores : nullptr);
    if (score > best_score) {
      best = hyp;
      best_score = score;
    }
  }

  require(best.score >= 0.2, "alignment-failure",
          "best silhouette IoU " + std::to_string(best.score) + " is below 0.2");
  return best;
}

struct ScaleAlignment {
  PoseHypothesis pose;  // final placement: yaw, scaled world translation, scale
  double iou = 0.0;     // silhouette IoU of the unscaled search
};

// Full alignment: silhouette search at scale 1, closed-form scale from the
// depth-sum ratio, then the translation is rescaled about the camera center
// (which preserves the matched silhouette exactly).
inline ScaleAlignment align_mesh_to_observation(const TriMesh& mesh, const DepthMap& depth,
                                                const Mask& mask, const CameraIntrinsics& intr,
                                                const CameraExtrinsics& extr,
                                                int yaw_samples = 72, int refine_steps = 20) {
  ScaleAlignment out;
  PoseHypothesis unscaled = search_pose(mesh, mask, depth, intr, extr, yaw_samples, refine_steps);
  out.iou = unscaled.score;
  const RenderResult rendered = render_depth(mesh, hypothesis_pose(unscaled, extr), 1.0, intr);
  const double scale = estimate_scale(depth, rendered.depth, mask);
  const Point3 camera_origin = extr.origin_in_base();
  out.pose = unscaled;
  out.pose.scale = scale;
  out.pose.translation = scale * unscaled.translation + (1.0 - scale) * camera_origin;
  return out;
}

}  // namespace twinforge
