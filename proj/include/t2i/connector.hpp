#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "t2i/error.hpp"
#include "t2i/se2.hpp"

namespace t2i {

using PointCloud2 = std::vector<Vec2>;

struct Circle {
  double radius = 1.0;
};

struct RoundedRect {
  double width = 1.0;
  double height = 1.0;
  double corner_radius = 0.0;
};

// Simple polygon, vertices counter-clockwise.
struct Polygon {
  std::vector<Vec2> vertices;
};

using Primitive = std::variant<Circle, RoundedRect, Polygon>;

struct InnerFeature;

// A primitive outer boundary centred on the local origin, optionally edited by
// inner features. `add` features union material into the region, `subtract`
// features cut it out (e.g. a tongue inside a receptacle opening).
struct CrossSection {
  Primitive outer;
  std::vector<InnerFeature> inner_features;
};

struct InnerFeature {
  enum class Op { add, subtract };
  Op op = Op::subtract;
  Pose2 placement;
  CrossSection shape;
};

namespace detail {

inline double segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  double u = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
  u = std::clamp(u, 0.0, 1.0);
  return (p - (a + u * ab)).norm();
}

// Winding number of a closed polygon around p (non-zero means inside).
inline int winding_number(const std::vector<Vec2>& v, const Vec2& p) {
  int wn = 0;
  const std::size_t n = v.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = v[i];
    const Vec2& b = v[(i + 1) % n];
    const double cross = (b.x() - a.x()) * (p.y() - a.y()) - (p.x() - a.x()) * (b.y() - a.y());
    if (a.y() <= p.y()) {
      if (b.y() > p.y() && cross > 0.0) ++wn;
    } else {
      if (b.y() <= p.y() && cross < 0.0) --wn;
    }
  }
  return wn;
}

inline double signed_area(const std::vector<Vec2>& v) {
  double a = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vec2& p = v[i];
    const Vec2& q = v[(i + 1) % v.size()];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * a;
}

inline double orient(const Vec2& a, const Vec2& b, const Vec2& c) {
  return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

inline bool segments_intersect(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
  const double d1 = orient(q1, q2, p1), d2 = orient(q1, q2, p2);
  const double d3 = orient(p1, p2, q1), d4 = orient(p1, p2, q2);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) {
    return true;
  }
  auto on_segment = [](const Vec2& a, const Vec2& b, const Vec2& c) {
    return std::min(a.x(), b.x()) <= c.x() && c.x() <= std::max(a.x(), b.x()) &&
           std::min(a.y(), b.y()) <= c.y() && c.y() <= std::max(a.y(), b.y());
  };
  return (d1 == 0 && on_segment(q1, q2, p1)) || (d2 == 0 && on_segment(q1, q2, p2)) ||
         (d3 == 0 && on_segment(p1, p2, q1)) || (d4 == 0 && on_segment(p1, p2, q2));
}

inline double primitive_sdf(const Circle& c, const Vec2& p) { return p.norm() - c.radius; }

inline double primitive_sdf(const RoundedRect& r, const Vec2& p) {
  const Vec2 half(0.5 * r.width - r.corner_radius, 0.5 * r.height - r.corner_radius);
  const Vec2 q = p.cwiseAbs() - half;
  const Vec2 qpos = q.cwiseMax(0.0);
  return qpos.norm() + std::min(std::max(q.x(), q.y()), 0.0) - r.corner_radius;
}

inline double primitive_sdf(const Polygon& poly, const Vec2& p) {
  const auto& v = poly.vertices;
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < v.size(); ++i) {
    d = std::min(d, segment_distance(p, v[i], v[(i + 1) % v.size()]));
  }
  return winding_number(v, p) != 0 ? -d : d;
}

inline double primitive_perimeter(const Circle& c) { return 2.0 * kPi * c.radius; }
inline double primitive_perimeter(const RoundedRect& r) {
  return 2.0 * (r.width - 2.0 * r.corner_radius) + 2.0 * (r.height - 2.0 * r.corner_radius) +
         2.0 * kPi * r.corner_radius;
}
inline double primitive_perimeter(const Polygon& poly) {
  double len = 0.0;
  for (std::size_t i = 0; i < poly.vertices.size(); ++i) {
    len += (poly.vertices[(i + 1) % poly.vertices.size()] - poly.vertices[i]).norm();
  }
  return len;
}

inline double primitive_area(const Circle& c) { return kPi * c.radius * c.radius; }
inline double primitive_area(const RoundedRect& r) {
  return r.width * r.height - (4.0 - kPi) * r.corner_radius * r.corner_radius;
}
inline double primitive_area(const Polygon& poly) { return std::abs(signed_area(poly.vertices)); }

// Point at arc length s along the boundary, counter-clockwise.
inline Vec2 primitive_point_at(const Circle& c, double s) {
  const double a = s / c.radius;
  return {c.radius * std::cos(a), c.radius * std::sin(a)};
}

inline Vec2 primitive_point_at(const RoundedRect& r, double s) {
  const double cr = r.corner_radius;
  const double hx = 0.5 * r.width - cr, hy = 0.5 * r.height - cr;
  const double quarter = 0.5 * kPi * cr;
  // Starts at (w/2, 0) going up the right edge.
  struct Piece {
    double length;
    bool arc;
    Vec2 a;       // line start or arc centre
    Vec2 dir;     // line direction
    double phi0;  // arc start angle
  };
  const Piece pieces[] = {
      {hy, false, {hx + cr, 0.0}, {0.0, 1.0}, 0.0},
      {quarter, true, {hx, hy}, {}, 0.0},
      {2.0 * hx, false, {hx, hy + cr}, {-1.0, 0.0}, 0.0},
      {quarter, true, {-hx, hy}, {}, 0.5 * kPi},
      {2.0 * hy, false, {-hx - cr, hy}, {0.0, -1.0}, 0.0},
      {quarter, true, {-hx, -hy}, {}, kPi},
      {2.0 * hx, false, {-hx, -hy - cr}, {1.0, 0.0}, 0.0},
      {quarter, true, {hx, -hy}, {}, 1.5 * kPi},
      {hy, false, {hx + cr, -hy}, {0.0, 1.0}, 0.0},
  };
  for (const Piece& pc : pieces) {
    if (s <= pc.length || &pc == &pieces[8]) {
      if (pc.arc) {
        const double phi = pc.phi0 + (cr > 0.0 ? s / cr : 0.0);
        return pc.a + cr * Vec2(std::cos(phi), std::sin(phi));
      }
      return pc.a + std::min(s, pc.length) * pc.dir;
    }
    s -= pc.length;
  }
  return {hx + cr, 0.0};
}

inline Vec2 primitive_point_at(const Polygon& poly, double s) {
  const auto& v = poly.vertices;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vec2& a = v[i];
    const Vec2& b = v[(i + 1) % v.size()];
    const double len = (b - a).norm();
    if (s <= len || i + 1 == v.size()) {
      return len > 0.0 ? Vec2(a + std::min(s, len) / len * (b - a)) : a;
    }
    s -= len;
  }
  return v.front();
}

// Support function: max over the boundary of dot(x, dir), dir unit.
inline double primitive_support(const Circle& c, const Vec2& dir) { return c.radius; }
inline double primitive_support(const RoundedRect& r, const Vec2& dir) {
  const double hx = 0.5 * r.width - r.corner_radius, hy = 0.5 * r.height - r.corner_radius;
  return hx * std::abs(dir.x()) + hy * std::abs(dir.y()) + r.corner_radius;
}
inline double primitive_support(const Polygon& poly, const Vec2& dir) {
  double m = -std::numeric_limits<double>::infinity();
  for (const Vec2& v : poly.vertices) m = std::max(m, v.dot(dir));
  return m;
}

}  // namespace detail

inline void validate_primitive(const Primitive& prim) {
  std::visit(
      [](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Circle>) {
          if (!(p.radius > 0.0)) throw Error(ErrorCategory::invalid_argument, "circle radius must be > 0");
        } else if constexpr (std::is_same_v<T, RoundedRect>) {
          if (!(p.width > 0.0 && p.height > 0.0)) {
            throw Error(ErrorCategory::invalid_argument, "rounded rect dimensions must be > 0");
          }
          if (p.corner_radius < 0.0 || p.corner_radius > 0.5 * std::min(p.width, p.height)) {
            throw Error(ErrorCategory::invalid_argument,
                        "rounded rect corner radius must lie in [0, min(width, height)/2]");
          }
        } else {
          const auto& v = p.vertices;
          if (v.size() < 3) throw Error(ErrorCategory::invalid_argument, "polygon needs >= 3 vertices");
          if (detail::signed_area(v) <= 0.0) {
            throw Error(ErrorCategory::invalid_argument, "polygon vertices must be counter-clockwise");
          }
          const std::size_t n = v.size();
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
              const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
              if (adjacent) continue;
              if (detail::segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n])) {
                throw Error(ErrorCategory::invalid_argument, "polygon is self-intersecting");
              }
            }
          }
        }
      },
      prim);
}

inline double signed_distance(const CrossSection& shape, const Vec2& p) {
  double d = std::visit([&](const auto& prim) { return detail::primitive_sdf(prim, p); }, shape.outer);
  for (const InnerFeature& f : shape.inner_features) {
    const double fd = signed_distance(f.shape, f.placement.inverse() * p);
    d = f.op == InnerFeature::Op::add ? std::min(d, fd) : std::max(d, -fd);
  }
  return d;
}

inline bool contains(const CrossSection& shape, const Vec2& p) { return signed_distance(shape, p) < 0.0; }

inline double outer_perimeter(const CrossSection& shape) {
  return std::visit([](const auto& p) { return detail::primitive_perimeter(p); }, shape.outer);
}

inline double outer_area(const CrossSection& shape) {
  return std::visit([](const auto& p) { return detail::primitive_area(p); }, shape.outer);
}

// Area of the region after inner features, assuming features are disjoint and
// inside the outer boundary.
inline double region_area(const CrossSection& shape) {
  double a = outer_area(shape);
  for (const InnerFeature& f : shape.inner_features) {
    a += (f.op == InnerFeature::Op::add ? 0.0 : -1.0) * region_area(f.shape);
  }
  return a;
}

// Max extent of the outer boundary along unit direction `dir` after placing
// the shape at `pose`.
inline double support(const CrossSection& shape, const Pose2& pose, const Vec2& dir) {
  const Vec2 local = pose.rotation_matrix().transpose() * dir;
  return dir.dot(pose.t()) +
         std::visit([&](const auto& p) { return detail::primitive_support(p, local); }, shape.outer);
}

// n points, arc-length uniform, along the outer boundary.
inline PointCloud2 sample_boundary(const CrossSection& shape, int n) {
  if (n < 3) throw Error(ErrorCategory::invalid_argument, "sample_boundary needs n >= 3");
  const double perim = outer_perimeter(shape);
  PointCloud2 out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double s = perim * static_cast<double>(i) / n;
    out.push_back(std::visit([&](const auto& p) { return detail::primitive_point_at(p, s); }, shape.outer));
  }
  return out;
}

inline void validate(const CrossSection& shape) {
  validate_primitive(shape.outer);
  for (const InnerFeature& f : shape.inner_features) {
    validate(f.shape);
    // Feature boundary must stay inside the outer primitive.
    for (const Vec2& p : sample_boundary(f.shape, 64)) {
      const Vec2 q = f.placement * p;
      const double d = std::visit([&](const auto& prim) { return detail::primitive_sdf(prim, q); }, shape.outer);
      if (d >= 0.0) throw Error(ErrorCategory::invalid_argument, "inner feature leaves the outer boundary");
    }
  }
}

struct ConnectorPreset {
  std::string name;
  CrossSection peg;
  CrossSection hole;
  SymmetryGroup symmetry = SymmetryGroup::cyclic(1);
};

// Hole outline strictly contains the centred peg outline (positive clearance).
inline bool hole_contains_peg(const ConnectorPreset& preset, int samples = 720) {
  CrossSection hole_outer{preset.hole.outer, {}};
  for (const Vec2& p : sample_boundary(preset.peg, samples)) {
    if (!(signed_distance(hole_outer, p) < 0.0)) return false;
  }
  return true;
}

inline RoundedRect grow(const RoundedRect& r, double clearance) {
  return {r.width + 2.0 * clearance, r.height + 2.0 * clearance, r.corner_radius + clearance};
}

// Default connector catalogue. Dimensions are sized so every hole pose of the
// +-4 mm evaluation grid keeps the opening on an 18.6 x 14.3 mm sensor.
inline std::vector<ConnectorPreset> preset_catalog() {
  std::vector<ConnectorPreset> out;

  out.push_back({"audio-jack", CrossSection{Circle{1.75}, {}}, CrossSection{Circle{1.85}, {}},
                 SymmetryGroup::circular()});

  const RoundedRect lightning_peg{5.0, 1.2, 0.6};
  CrossSection lightning_hole{grow(lightning_peg, 0.15), {}};
  // Contact tongue inside the receptacle, cut out of the opening.
  lightning_hole.inner_features.push_back(
      {InnerFeature::Op::subtract, Pose2::identity(), CrossSection{RoundedRect{3.0, 0.5, 0.25}, {}}});
  out.push_back({"lightning", CrossSection{lightning_peg, {}}, lightning_hole, SymmetryGroup::cyclic(2)});

  const RoundedRect usbc_peg{5.4, 1.7, 0.85};
  out.push_back({"usbc", CrossSection{usbc_peg, {}}, CrossSection{grow(usbc_peg, 0.1), {}},
                 SymmetryGroup::cyclic(2)});
  return out;
}

inline const ConnectorPreset& find_preset(const std::vector<ConnectorPreset>& catalog, const std::string& name) {
  for (const auto& p : catalog) {
    if (p.name == name) return p;
  }
  throw Error(ErrorCategory::config, "unknown connector preset '" + name + "'");
}

}  // namespace t2i
