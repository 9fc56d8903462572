#include <gtest/gtest.h>

#include <functional>
#include <random>

#include "oracles.hpp"
#include "t2i/preprocess.hpp"
#include "t2i/tactile.hpp"

using namespace t2i;

namespace {

PointCloud3 render_cloud(const CrossSection& shape, const Pose2& pose, ContactSide side, double noise = 0.0) {
  SensorModel s;
  s.gradient_noise_sigma = noise;
  const auto obs = render_contact(shape, pose, s, side, 3);
  return height_to_cloud(integrate_gradients(obs.gradients));
}

ErrorCategory category_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.category();
  }
  return ErrorCategory::config;
}

PointCloud2 square(double side, const Vec2& origin, double step) {
  PointCloud2 out;
  for (double x = 0; x <= side + 1e-9; x += step) {
    for (double y = 0; y <= side + 1e-9; y += step) out.push_back(origin + Vec2(x, y));
  }
  return out;
}

}  // namespace

TEST(FlipZ, Examples) {
  const PointCloud3 zero{{0, 0, 0}, {1, 0, 0}};
  EXPECT_EQ(flip_z(zero), zero);
  const PointCloud3 two{{0, 0, 0}, {1, 0, 1}};
  const auto f = flip_z(two);
  EXPECT_EQ(f[0].z(), 1.0);
  EXPECT_EQ(f[1].z(), 0.0);
  EXPECT_THROW((void)flip_z({}), Error);
}

TEST(FlipZ, Involution) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  PointCloud3 c;
  for (int i = 0; i < 100; ++i) c.emplace_back(u(rng), u(rng), u(rng));
  c.emplace_back(0, 0, 0);  // pins min z at 0 so the double flip is exact
  const auto ff = flip_z(flip_z(c));
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(ff[i].z(), c[i].z(), 1e-15);
}

TEST(HeightFilter, Examples) {
  const PointCloud3 c{{0, 0, 0.1}, {1, 0, 0.9}, {2, 0, 0.0}};
  EXPECT_EQ(height_filter(c, -1.0), c);
  const auto f = height_filter({{0, 0, 0.1}, {0, 1, 0.9}}, 0.5);
  ASSERT_EQ(f.size(), 1u);
  EXPECT_EQ(f[0].z(), 0.9);
  EXPECT_EQ(category_of([&] { (void)height_filter(c, 5.0); }), ErrorCategory::contact_loss);
}

TEST(HeightFilter, PegFootprintArea) {
  const SensorModel s;
  const auto kept = height_filter(render_cloud({Circle{2}, {}}, Pose2::identity(), ContactSide::peg), 0.5 * s.press_depth_mm);
  const double area = kept.size() * s.pitch().dx * s.pitch().dy;
  EXPECT_NEAR(area / (kPi * 4.0), 1.0, 0.03);
}

TEST(Project, Example) {
  const auto p = project_to_plane({{1, 2, 3}});
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0], Vec2(1, 2));
}

TEST(Preprocess, CommutesWithInPlaneMotion) {
  // Filtering a rendered pose equals filtering the reference and moving it,
  // up to pixel discretisation: compare footprint area and centroid.
  const SensorModel s;
  const CrossSection shape{RoundedRect{5, 2, 0.5}, {}};
  const Pose2 g = Pose2::from_degrees(60, 1.5, -1.0);
  const auto a = project_to_plane(height_filter(render_cloud(shape, Pose2::identity(), ContactSide::peg), 0.25));
  const auto b = project_to_plane(height_filter(render_cloud(shape, g, ContactSide::peg), 0.25));
  EXPECT_NEAR(static_cast<double>(b.size()) / a.size(), 1.0, 0.02);
  Vec2 ca = Vec2::Zero(), cb = Vec2::Zero();
  for (const Vec2& p : a) ca += p;
  for (const Vec2& p : b) cb += p;
  ca /= a.size();
  cb /= b.size();
  const Pose2 to_sensor = Pose2::translation(s.grid_origin());
  const Vec2 moved = inverse(to_sensor) * (g * (to_sensor * ca));
  EXPECT_LE((moved - cb).norm(), 0.02);
}

TEST(Dbscan, TwoBlobs) {
  const double eps = 0.1;
  PointCloud2 pts = square(0.05, {0, 0}, 0.01);
  const PointCloud2 far = square(0.05, {10, 0}, 0.01);
  pts.insert(pts.end(), far.begin(), far.end());
  const Clustering c = dbscan(pts, eps, 8);
  EXPECT_EQ(c.cluster_count, 2);
  EXPECT_TRUE(c.noise(pts).empty());
}

TEST(Dbscan, IsolatedPointIsNoise) {
  const Clustering c = dbscan({{0, 0}}, 0.5, 2);
  EXPECT_EQ(c.cluster_count, 0);
  EXPECT_EQ(c.labels[0], Clustering::kNoise);
}

TEST(Dbscan, MatchesBruteForceReference) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  const double eps_values[] = {0.3, 0.6, 1.0, 1.5};
  const int min_pts_values[] = {1, 3, 5, 8};
  for (int trial = 0; trial < 100; ++trial) {
    PointCloud2 pts;
    for (int i = 0; i < 200; ++i) pts.emplace_back(u(rng), u(rng));
    const double eps = eps_values[trial % 4];
    const int min_pts = min_pts_values[(trial / 4) % 4];
    const Clustering c = dbscan(pts, eps, min_pts);
    EXPECT_TRUE(oracle::same_partition(c.labels, oracle::dbscan(pts, eps, min_pts))) << trial;
  }
}

TEST(Dbscan, IsPartition) {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  PointCloud2 pts;
  for (int i = 0; i < 500; ++i) pts.emplace_back(u(rng), u(rng));
  const Clustering c = dbscan(pts, 0.3, 4);
  std::size_t n = c.noise(pts).size();
  for (const auto& cl : c.clusters(pts)) {
    EXPECT_FALSE(cl.empty());
    n += cl.size();
  }
  EXPECT_EQ(n, pts.size());
}

TEST(Hull, Examples) {
  EXPECT_DOUBLE_EQ(convex_hull_area({{0, 0}, {1, 0}, {1, 1}, {0, 1}}), 1.0);
  EXPECT_DOUBLE_EQ(convex_hull_area({{0, 0}, {1, 1}, {2, 2}}), 0.0);
  const auto h = convex_hull({{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.5, 0.5}, {0.5, 0}});
  EXPECT_EQ(h.size(), 4u);
  EXPECT_GT(detail::signed_area(h), 0.0);
}

TEST(Hull, RandomDiskBounds) {
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PointCloud2 pts;
  while (pts.size() < 1000) {
    const Vec2 p(u(rng), u(rng));
    if (p.norm() < 1.0) pts.push_back(p);
  }
  const double area = convex_hull_area(pts);
  EXPECT_LE(area, kPi);
  // Any polygon through a subset of the points is inside the hull.
  for (int k = 0; k < 20; ++k) {
    PointCloud2 sub(pts.begin() + 20 * k, pts.begin() + 20 * k + 20);
    EXPECT_GE(area + 1e-12, convex_hull_area(sub));
    EXPECT_NEAR(convex_hull_area(sub), oracle::hull_area(sub), 1e-12);
  }
}

TEST(Hull, InvariantsUnderMotionAndScale) {
  std::mt19937_64 rng(34);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int k = 0; k < 50; ++k) {
    PointCloud2 pts;
    for (int i = 0; i < 40; ++i) pts.emplace_back(u(rng), u(rng));
    const double a = convex_hull_area(pts);
    const Pose2 g(u(rng), u(rng), u(rng));
    PointCloud2 moved, scaled;
    for (const Vec2& p : pts) {
      moved.push_back(g * p);
      scaled.push_back(2.0 * p);
    }
    EXPECT_NEAR(convex_hull_area(moved), a, 1e-10);
    EXPECT_NEAR(convex_hull_area(scaled), 4.0 * a, 1e-10);
  }
}

TEST(RemoveBackground, Examples) {
  const PointCloud2 a = square(10, {0, 0}, 1.0), b = square(1, {20, 0}, 0.5);
  const auto kept = remove_background(std::vector<PointCloud2>{a, b});
  EXPECT_EQ(kept, b);
  EXPECT_EQ(remove_background(std::vector<PointCloud2>{a}), a);
  EXPECT_EQ(category_of([] { (void)remove_background(std::vector<PointCloud2>{}); }), ErrorCategory::no_clusters);
}

TEST(RemoveBackground, NeverGrowsOrEmpties) {
  std::mt19937_64 rng(35);
  std::uniform_real_distribution<double> u(0.0, 6.0);
  for (int k = 0; k < 30; ++k) {
    PointCloud2 pts;
    for (int i = 0; i < 300; ++i) pts.emplace_back(u(rng), u(rng));
    const Clustering c = dbscan(pts, 0.4, 4);
    if (c.cluster_count == 0) {
      EXPECT_THROW((void)remove_background(c, pts), Error);
      continue;
    }
    const auto kept = remove_background(c, pts);
    EXPECT_LE(kept.size(), pts.size());
    EXPECT_FALSE(kept.empty());
  }
}

TEST(RemoveBackground, HoleOpeningArea) {
  const auto preset = find_preset(preset_catalog(), "usbc");
  const auto hole = render_cloud(preset.hole, Pose2::from_degrees(30, 1, -1), ContactSide::hole);
  const PipelineParams params = PipelineParams::for_sensor(SensorModel{});
  const auto projected = project_to_plane(height_filter(flip_z(hole), params.z_th));
  const auto clean = remove_background(dbscan(projected, params.dbscan_eps, params.dbscan_min_pts), projected);
  EXPECT_NEAR(convex_hull_area(clean) / outer_area(preset.hole), 1.0, 0.10);
}

TEST(PreprocessPair, CircleCentroid) {
  const auto preset = find_preset(preset_catalog(), "audio-jack");
  const SensorModel s;
  const Pose2 offset(0, 1.5, -2.0);
  const auto peg = render_cloud(preset.peg, Pose2::identity(), ContactSide::peg);
  const auto hole = render_cloud(preset.hole, offset, ContactSide::hole);
  const auto [p, h] = preprocess_pair(peg, hole, PipelineParams::for_sensor(s));
  ASSERT_FALSE(p.empty());
  ASSERT_FALSE(h.empty());
  Vec2 c = Vec2::Zero();
  for (const Vec2& q : h) c += q;
  c /= h.size();
  EXPECT_LE((c + s.grid_origin() - offset.t()).norm(), 0.2);
}

TEST(PreprocessPair, ThresholdAboveDepthIsContactLoss) {
  const auto preset = find_preset(preset_catalog(), "audio-jack");
  const SensorModel s;
  const auto peg = render_cloud(preset.peg, Pose2::identity(), ContactSide::peg);
  const auto hole = render_cloud(preset.hole, Pose2(0, 1, 1), ContactSide::hole);
  PipelineParams params;
  params.z_th = 10.0 * s.press_depth_mm;
  try {
    (void)preprocess_pair(peg, hole, params);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::contact_loss);
    EXPECT_EQ(e.stage(), "peg_filter");
  }
}

TEST(PipelineParams, SensorDefaults) {
  const PipelineParams p = PipelineParams::for_sensor(SensorModel{});
  EXPECT_DOUBLE_EQ(p.z_th, 0.25);
  EXPECT_NEAR(p.dbscan_eps, 3.0 * 14.3 / 240, 1e-15);
  PipelineParams bad;
  bad.dbscan_eps = 0.0;
  EXPECT_THROW(bad.validate(), Error);
}
