#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "t2i/connector.hpp"
#include "t2i/error.hpp"
#include "t2i/reconstruction.hpp"
#include "t2i/spatial_index.hpp"

namespace t2i {

struct PipelineParams {
  double z_th = 0.25;         // mm; default half of the 0.5 mm press depth
  double dbscan_eps = 0.18;   // mm; ~3 pixel pitches
  int dbscan_min_pts = 8;

  // Defaults tied to a sensor: z_th = depth / 2, eps = 3 * max pitch.
  static PipelineParams for_sensor(const SensorModel& s) {
    PipelineParams p;
    p.z_th = 0.5 * s.press_depth_mm;
    const Pitch pitch = s.pitch();
    p.dbscan_eps = 3.0 * std::max(pitch.dx, pitch.dy);
    return p;
  }

  void validate() const {
    if (!(z_th >= 0.0)) throw Error(ErrorCategory::invalid_argument, "z_th must be >= 0");
    if (!(dbscan_eps > 0.0)) throw Error(ErrorCategory::invalid_argument, "dbscan eps must be > 0");
    if (dbscan_min_pts < 1) throw Error(ErrorCategory::invalid_argument, "dbscan min_pts must be >= 1");
  }
};

// z -> z_max - z; turns the hole's recessed opening into a raised region.
inline PointCloud3 flip_z(const PointCloud3& cloud) {
  if (cloud.empty()) throw Error(ErrorCategory::invalid_argument, "flip_z: empty cloud");
  double z_max = -std::numeric_limits<double>::infinity();
  for (const Vec3& p : cloud) z_max = std::max(z_max, p.z());
  PointCloud3 out;
  out.reserve(cloud.size());
  for (const Vec3& p : cloud) out.emplace_back(p.x(), p.y(), z_max - p.z());
  return out;
}

// Keeps points with z > z_th (indentation-positive convention).
inline PointCloud3 height_filter(const PointCloud3& cloud, double z_th) {
  PointCloud3 out;
  for (const Vec3& p : cloud) {
    if (p.z() > z_th) out.push_back(p);
  }
  if (out.empty()) {
    throw Error(ErrorCategory::contact_loss, "no points above z_th: contact lost");
  }
  return out;
}

inline PointCloud2 project_to_plane(const PointCloud3& cloud) {
  PointCloud2 out;
  out.reserve(cloud.size());
  for (const Vec3& p : cloud) out.emplace_back(p.x(), p.y());
  return out;
}

struct Clustering {
  static constexpr int kNoise = -1;
  std::vector<int> labels;  // per input point: cluster id or kNoise
  int cluster_count = 0;

  std::vector<PointCloud2> clusters(const PointCloud2& cloud) const {
    std::vector<PointCloud2> out(static_cast<std::size_t>(cluster_count));
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      if (labels[i] >= 0) out[static_cast<std::size_t>(labels[i])].push_back(cloud[i]);
    }
    return out;
  }

  PointCloud2 noise(const PointCloud2& cloud) const {
    PointCloud2 out;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      if (labels[i] == kNoise) out.push_back(cloud[i]);
    }
    return out;
  }
};

// DBSCAN. A point is core when at least min_pts points (itself included) lie
// within eps. Points are scanned in index order; each unlabelled core point
// seeds a cluster grown breadth-first, and a border point joins the first
// cluster that reaches it.
inline Clustering dbscan(const PointCloud2& cloud, double eps, int min_pts) {
  if (!(eps > 0.0)) throw Error(ErrorCategory::invalid_argument, "dbscan: eps must be > 0");
  if (min_pts < 1) throw Error(ErrorCategory::invalid_argument, "dbscan: min_pts must be >= 1");
  Clustering out;
  out.labels.assign(cloud.size(), Clustering::kNoise);
  if (cloud.empty()) return out;

  constexpr int kUnvisited = -2;
  std::fill(out.labels.begin(), out.labels.end(), kUnvisited);
  const GridIndex<2> index(cloud, eps);
  std::vector<std::size_t> nbrs, nbrs2;
  std::deque<std::size_t> queue;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (out.labels[i] != kUnvisited) continue;
    index.within(cloud[i], eps, nbrs);
    if (static_cast<int>(nbrs.size()) < min_pts) {
      out.labels[i] = Clustering::kNoise;
      continue;
    }
    const int id = out.cluster_count++;
    out.labels[i] = id;
    queue.assign(nbrs.begin(), nbrs.end());
    while (!queue.empty()) {
      const std::size_t j = queue.front();
      queue.pop_front();
      if (out.labels[j] == Clustering::kNoise) out.labels[j] = id;  // border point
      if (out.labels[j] != kUnvisited) continue;
      out.labels[j] = id;
      index.within(cloud[j], eps, nbrs2);
      if (static_cast<int>(nbrs2.size()) >= min_pts) queue.insert(queue.end(), nbrs2.begin(), nbrs2.end());
    }
  }
  return out;
}

// Andrew's monotone chain; returns hull vertices counter-clockwise without
// collinear points.
inline PointCloud2 convex_hull(PointCloud2 pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  PointCloud2 hull(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && detail::orient(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i > 0; --i) {
    while (k >= t && detail::orient(hull[k - 2], hull[k - 1], pts[i - 1]) <= 0.0) --k;
    hull[k++] = pts[i - 1];
  }
  hull.resize(k - 1);
  return hull;
}

inline double convex_hull_area(const PointCloud2& points) {
  const PointCloud2 hull = convex_hull(points);
  if (hull.size() < 3) return 0.0;
  return std::abs(detail::signed_area(hull));
}

// Drops the largest-hull-area cluster (the background) and all noise when
// two or more clusters exist; a lone cluster is returned as is.
inline PointCloud2 remove_background(const std::vector<PointCloud2>& clusters) {
  if (clusters.empty()) {
    throw Error(ErrorCategory::no_clusters, "background removal: every point is noise");
  }
  if (clusters.size() == 1) return clusters.front();
  std::size_t drop = 0;
  double drop_area = -1.0;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    const double a = convex_hull_area(clusters[i]);
    if (a > drop_area || (a == drop_area && clusters[i].size() > clusters[drop].size())) {
      drop = i;
      drop_area = a;
    }
  }
  PointCloud2 out;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    if (i != drop) out.insert(out.end(), clusters[i].begin(), clusters[i].end());
  }
  return out;
}

inline PointCloud2 remove_background(const Clustering& c, const PointCloud2& cloud) {
  return remove_background(c.clusters(cloud));
}

// Intermediate clouds of one preprocessing run, for stage dumps.
struct PreprocessStages {
  PointCloud3 peg_filtered;
  PointCloud3 hole_flipped;
  PointCloud3 hole_filtered;
  PointCloud2 peg_projected;
  PointCloud2 hole_projected;
  PointCloud2 hole_clean;
  int hole_cluster_count = 0;
};

// Peg: filter, project. Hole: flip, filter, project, DBSCAN, drop background.
inline PreprocessStages preprocess_pair_stages(const PointCloud3& peg, const PointCloud3& hole,
                                               const PipelineParams& params) {
  params.validate();
  if (peg.empty() || hole.empty()) throw Error(ErrorCategory::invalid_argument, "preprocess: empty input cloud");
  auto staged = [](const char* stage, auto&& fn) {
    try {
      return fn();
    } catch (const Error& e) {
      throw e.with_stage(stage);
    }
  };
  PreprocessStages s;
  s.peg_filtered = staged("peg_filter", [&] { return height_filter(peg, params.z_th); });
  s.peg_projected = project_to_plane(s.peg_filtered);
  s.hole_flipped = staged("hole_flip", [&] { return flip_z(hole); });
  s.hole_filtered = staged("hole_filter", [&] { return height_filter(s.hole_flipped, params.z_th); });
  s.hole_projected = project_to_plane(s.hole_filtered);
  const Clustering c = dbscan(s.hole_projected, params.dbscan_eps, params.dbscan_min_pts);
  s.hole_cluster_count = c.cluster_count;
  s.hole_clean = staged("hole_background", [&] { return remove_background(c, s.hole_projected); });
  return s;
}

inline std::pair<PointCloud2, PointCloud2> preprocess_pair(const PointCloud3& peg, const PointCloud3& hole,
                                                           const PipelineParams& params) {
  PreprocessStages s = preprocess_pair_stages(peg, hole, params);
  return {std::move(s.peg_projected), std::move(s.hole_clean)};
}

}  // namespace t2i
