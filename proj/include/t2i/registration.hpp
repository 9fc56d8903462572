#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "t2i/connector.hpp"
#include "t2i/error.hpp"
#include "t2i/reconstruction.hpp"
#include "t2i/se2.hpp"
#include "t2i/spatial_index.hpp"

namespace t2i {

struct IcpParams {
  int max_icp_iters = 50;
  double convergence_tol = 1e-4;  // mm, change in RMS matched distance
  double inlier_dist = 0.3;       // mm
  double delta_alpha_deg = 10.0;
  int n_max_restarts = 1;
  double restart_jitter_mm = 0.2;  // translation jitter on restarts after the first
  std::uint64_t seed = 0;

  int alpha_count() const { return static_cast<int>(std::lround(360.0 / delta_alpha_deg)); }

  void validate() const {
    if (max_icp_iters < 1) throw Error(ErrorCategory::invalid_argument, "max_icp_iters must be >= 1");
    if (!(convergence_tol > 0.0)) throw Error(ErrorCategory::invalid_argument, "convergence_tol must be > 0");
    if (!(inlier_dist > 0.0)) throw Error(ErrorCategory::invalid_argument, "inlier_dist must be > 0");
    if (n_max_restarts < 1) throw Error(ErrorCategory::invalid_argument, "n_max_restarts must be >= 1");
    if (!(delta_alpha_deg > 0.0) || std::abs(alpha_count() * delta_alpha_deg - 360.0) > 1e-9) {
      throw Error(ErrorCategory::invalid_argument, "delta_alpha must be positive and divide 360");
    }
  }
};

struct IcpResult {
  Pose2 pose;  // source -> target
  double inlier_ratio = 0.0;
  double rmse = 0.0;  // over inlier correspondences, mm
  int iterations = 0;
  bool converged = false;
  std::vector<double> rms_history;  // RMS matched distance per iteration, before its update
};

struct Candidate {
  double alpha_deg = 0.0;
  int restart = 0;
  bool ok = false;
  std::string failure;
  IcpResult icp;
};

struct RegistrationResult {
  Pose2 best;  // maps peg-cloud coordinates to hole-cloud coordinates
  double best_alpha_deg = 0.0;
  double best_inlier_ratio = 0.0;
  std::vector<Candidate> candidates;
};

// For each src point, the index of its nearest dst point (ties to lowest).
inline std::vector<std::size_t> nearest_correspondences(const PointCloud2& src, const GridIndex<2>& dst) {
  std::vector<std::size_t> out(src.size());
  for (std::size_t j = 0; j < src.size(); ++j) out[j] = dst.nearest(src[j]).index;
  return out;
}

inline std::vector<std::size_t> nearest_correspondences(const PointCloud2& src, const PointCloud2& dst) {
  if (src.empty() || dst.empty()) throw Error(ErrorCategory::invalid_argument, "correspondences need non-empty clouds");
  return nearest_correspondences(src, GridIndex<2>(dst));
}

// Least-squares rigid motion minimising sum |dst_i - T src_i|^2.
inline Pose2 solve_rigid_2d(std::span<const Vec2> src, std::span<const Vec2> dst) {
  if (src.size() != dst.size() || src.size() < 2) {
    throw Error(ErrorCategory::degenerate, "rigid solve needs >= 2 matched pairs");
  }
  Vec2 cs = Vec2::Zero(), cd = Vec2::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    cs += src[i];
    cd += dst[i];
  }
  cs /= static_cast<double>(src.size());
  cd /= static_cast<double>(dst.size());
  double sxx = 0.0, sxy = 0.0, spread = 0.0;  // sum p.q, sum p x q, sum |p|^2
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Vec2 p = src[i] - cs, q = dst[i] - cd;
    sxx += p.dot(q);
    sxy += p.x() * q.y() - p.y() * q.x();
    spread += p.squaredNorm();
  }
  if (!(spread > 0.0)) throw Error(ErrorCategory::degenerate, "source points coincide: rotation is indeterminate");
  const double theta = std::atan2(sxy, sxx);
  const Pose2 rot = Pose2::rotation(theta);
  return {theta, Vec2(cd - rot * cs)};
}

inline double compute_inlier_ratio(const PointCloud2& src_transformed, const GridIndex<2>& dst, double inlier_dist) {
  if (src_transformed.empty()) throw Error(ErrorCategory::invalid_argument, "inlier ratio of an empty cloud");
  const double d2 = inlier_dist * inlier_dist;
  std::size_t hits = 0;
  for (const Vec2& p : src_transformed) hits += dst.nearest(p).squared_distance <= d2 ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(src_transformed.size());
}

inline double compute_inlier_ratio(const PointCloud2& src_transformed, const PointCloud2& dst, double inlier_dist) {
  return compute_inlier_ratio(src_transformed, GridIndex<2>(dst), inlier_dist);
}

inline PointCloud2 transform_cloud(const Pose2& T, const PointCloud2& cloud) {
  PointCloud2 out(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) out[i] = T * cloud[i];
  return out;
}

inline Vec2 centroid(const PointCloud2& cloud) {
  Vec2 c = Vec2::Zero();
  for (const Vec2& p : cloud) c += p;
  return cloud.empty() ? c : Vec2(c / static_cast<double>(cloud.size()));
}

// Point-to-point ICP in SE(2). Each iteration matches the transformed source
// to its nearest targets and re-solves the full transform from the original
// source; it stops once an update lowers the RMS matched distance by less
// than convergence_tol.
inline IcpResult icp_2d(const PointCloud2& src, const GridIndex<2>& dst, const Pose2& init, const IcpParams& params) {
  if (src.size() < 3 || dst.size() < 3) throw Error(ErrorCategory::invalid_argument, "ICP needs >= 3 points per cloud");
  IcpResult res;
  Pose2 T = init;
  PointCloud2 moved(src.size()), matched(src.size());
  const auto& targets = dst.points();
  for (int it = 1; it <= params.max_icp_iters; ++it) {
    double sq = 0.0;
    for (std::size_t j = 0; j < src.size(); ++j) {
      moved[j] = T * src[j];
      const Neighbor nb = dst.nearest(moved[j]);
      matched[j] = targets[nb.index];
      sq += nb.squared_distance;
    }
    const double rms_before = std::sqrt(sq / static_cast<double>(src.size()));
    res.rms_history.push_back(rms_before);
    try {
      T = solve_rigid_2d(src, matched);
    } catch (const Error& e) {
      std::ostringstream msg;
      msg << "ICP iteration " << it << ": " << e.what();
      throw Error(e.category(), msg.str());
    }
    res.iterations = it;
    double sq_after = 0.0;
    for (std::size_t j = 0; j < src.size(); ++j) sq_after += (T * src[j] - matched[j]).squaredNorm();
    const double rms_after = std::sqrt(sq_after / static_cast<double>(src.size()));
    if (rms_before - rms_after < params.convergence_tol) {
      res.converged = true;
      break;
    }
  }
  res.pose = T;
  const double d2 = params.inlier_dist * params.inlier_dist;
  std::size_t hits = 0;
  double inlier_sq = 0.0;
  for (const Vec2& p : src) {
    const Neighbor nb = dst.nearest(T * p);
    if (nb.squared_distance <= d2) {
      ++hits;
      inlier_sq += nb.squared_distance;
    }
  }
  res.inlier_ratio = static_cast<double>(hits) / static_cast<double>(src.size());
  res.rmse = hits > 0 ? std::sqrt(inlier_sq / static_cast<double>(hits)) : 0.0;
  return res;
}

inline IcpResult icp_2d(const PointCloud2& src, const PointCloud2& dst, const Pose2& init, const IcpParams& params) {
  if (src.size() < 3 || dst.size() < 3) throw Error(ErrorCategory::invalid_argument, "ICP needs >= 3 points per cloud");
  return icp_2d(src, GridIndex<2>(dst), init, params);
}

// Strict ordering used to pick the winning candidate: higher inlier ratio,
// then lower RMSE, then lower alpha, then earlier restart.
inline bool better_candidate(const Candidate& a, const Candidate& b) {
  if (a.ok != b.ok) return a.ok;
  if (a.icp.inlier_ratio != b.icp.inlier_ratio) return a.icp.inlier_ratio > b.icp.inlier_ratio;
  if (a.icp.rmse != b.icp.rmse) return a.icp.rmse < b.icp.rmse;
  if (a.alpha_deg != b.alpha_deg) return a.alpha_deg < b.alpha_deg;
  return a.restart < b.restart;
}

// Rotation estimate theta* + alpha* with the winning ICP translation t*, for
// a source cloud that was rotated by alpha about the origin.
inline Pose2 combine_rotation(const Pose2& icp_pose, double alpha_rad) {
  return {icp_pose.theta() + alpha_rad, icp_pose.t()};
}

// Runs one ICP per (alpha, restart) on the centred, pre-rotated peg cloud.
inline std::vector<Candidate> run_candidates(const PointCloud2& peg_centered, const GridIndex<2>& hole_index,
                                             const Vec2& hole_centroid, const std::vector<double>& alphas_deg,
                                             const IcpParams& params) {
  std::vector<Candidate> out;
  out.reserve(alphas_deg.size() * static_cast<std::size_t>(params.n_max_restarts));
  for (int restart = 0; restart < params.n_max_restarts; ++restart) {
    std::mt19937_64 rng(params.seed ^ (0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(restart + 1)));
    std::uniform_real_distribution<double> jitter(-params.restart_jitter_mm, params.restart_jitter_mm);
    for (double alpha : alphas_deg) {
      Candidate cand;
      cand.alpha_deg = alpha;
      cand.restart = restart;
      Vec2 start = hole_centroid;
      if (restart > 0) {
        const double jx = jitter(rng);
        start += Vec2(jx, jitter(rng));
      }
      try {
        const PointCloud2 rotated = transform_cloud(Pose2::rotation(deg2rad(alpha)), peg_centered);
        cand.icp = icp_2d(rotated, hole_index, Pose2::translation(start), params);
        cand.ok = true;
      } catch (const Error& e) {
        cand.failure = e.what();
      }
      out.push_back(std::move(cand));
    }
  }
  return out;
}

inline std::vector<double> alpha_sweep(const IcpParams& params) {
  std::vector<double> a;
  for (int k = 0; k < params.alpha_count(); ++k) a.push_back(k * params.delta_alpha_deg);
  return a;
}

// Multi-initialisation registration of the peg cloud onto the hole cloud.
// The peg is centred on its centroid, swept through rotations alpha, and
// each rotated copy is aligned by ICP starting at the hole centroid. The
// candidate with the most inliers wins; its rotation becomes theta* + alpha*
// and the centring is undone so the result maps original peg coordinates.
inline RegistrationResult multi_init_register(const PointCloud2& peg, const PointCloud2& hole, const IcpParams& params,
                                              const std::vector<double>& alphas_deg) {
  params.validate();
  if (peg.size() < 3 || hole.size() < 3) {
    throw Error(ErrorCategory::invalid_argument, "registration needs >= 3 points per cloud");
  }
  const Vec2 c = centroid(peg);
  const PointCloud2 peg_centered = transform_cloud(Pose2::translation(-c), peg);
  const GridIndex<2> hole_index(hole);

  RegistrationResult res;
  res.candidates = run_candidates(peg_centered, hole_index, centroid(hole), alphas_deg, params);
  const Candidate* best = nullptr;
  for (const Candidate& cand : res.candidates) {
    if (cand.ok && (best == nullptr || better_candidate(cand, *best))) best = &cand;
  }
  if (best == nullptr) {
    std::ostringstream msg;
    msg << "all registration candidates failed:";
    for (const Candidate& cand : res.candidates) msg << " [alpha=" << cand.alpha_deg << ": " << cand.failure << "]";
    throw Error(ErrorCategory::registration, msg.str());
  }
  res.best_alpha_deg = best->alpha_deg;
  res.best_inlier_ratio = best->icp.inlier_ratio;
  res.best = compose(combine_rotation(best->icp.pose, deg2rad(best->alpha_deg)), Pose2::translation(-c));
  return res;
}

inline RegistrationResult multi_init_register(const PointCloud2& peg, const PointCloud2& hole, const IcpParams& params) {
  params.validate();
  return multi_init_register(peg, hole, params, alpha_sweep(params));
}

// --- 3D point-to-point ICP (no-preprocessing ablation) -------------------

struct Icp3dResult {
  Eigen::Isometry3d pose = Eigen::Isometry3d::Identity();
  int iterations = 0;
  bool converged = false;
  double rms = 0.0;
};

// Kabsch: least-squares rotation + translation with reflection guard.
inline Eigen::Isometry3d solve_rigid_3d(std::span<const Vec3> src, std::span<const Vec3> dst) {
  if (src.size() != dst.size() || src.size() < 3) {
    throw Error(ErrorCategory::degenerate, "3D rigid solve needs >= 3 matched pairs");
  }
  Vec3 cs = Vec3::Zero(), cd = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    cs += src[i];
    cd += dst[i];
  }
  cs /= static_cast<double>(src.size());
  cd /= static_cast<double>(src.size());
  Eigen::Matrix3d H = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) H += (src[i] - cs) * (dst[i] - cd).transpose();
  if (!(H.norm() > 0.0)) throw Error(ErrorCategory::degenerate, "3D rigid solve: zero cross-covariance");
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d D = Eigen::Matrix3d::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) D(2, 2) = -1.0;
  const Eigen::Matrix3d R = svd.matrixV() * D * svd.matrixU().transpose();
  Eigen::Isometry3d T = Eigen::Isometry3d::Identity();
  T.linear() = R;
  T.translation() = cd - R * cs;
  return T;
}

inline Icp3dResult icp_3d(const PointCloud3& src, const PointCloud3& dst, const Eigen::Isometry3d& init,
                          const IcpParams& params) {
  if (src.size() < 3 || dst.size() < 3) throw Error(ErrorCategory::invalid_argument, "ICP needs >= 3 points per cloud");
  const GridIndex<3> index(dst);
  Icp3dResult res;
  Eigen::Isometry3d T = init;
  PointCloud3 matched(src.size());
  for (int it = 1; it <= params.max_icp_iters; ++it) {
    double sq = 0.0;
    for (std::size_t j = 0; j < src.size(); ++j) {
      const Neighbor nb = index.nearest(T * src[j]);
      matched[j] = dst[nb.index];
      sq += nb.squared_distance;
    }
    const double rms_before = std::sqrt(sq / static_cast<double>(src.size()));
    T = solve_rigid_3d(src, matched);
    res.iterations = it;
    double sq_after = 0.0;
    for (std::size_t j = 0; j < src.size(); ++j) sq_after += (T * src[j] - matched[j]).squaredNorm();
    res.rms = std::sqrt(sq_after / static_cast<double>(src.size()));
    if (rms_before - res.rms < params.convergence_tol) {
      res.converged = true;
      break;
    }
  }
  res.pose = T;
  return res;
}

// Planar part of a 3D rigid motion: yaw about z and the xy translation.
inline Pose2 project_to_se2(const Eigen::Isometry3d& T) {
  const Eigen::Matrix3d& R = T.linear();
  return {std::atan2(R(1, 0), R(0, 0)), Vec2(T.translation().x(), T.translation().y())};
}

}  // namespace t2i
