#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

#include <Eigen/Core>

#include "t2i/error.hpp"

namespace t2i {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

inline constexpr double kPi = std::numbers::pi;

constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

// Wraps an angle in radians into (-pi, pi].
inline double normalize_angle(double rad) {
  double r = std::remainder(rad, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

// Planar rigid transform x -> R(theta) x + t. Angles are radians, lengths mm.
class Pose2 {
 public:
  Pose2() = default;
  Pose2(double theta, const Vec2& t) : theta_(normalize_angle(theta)), t_(t) {}
  Pose2(double theta, double tx, double ty) : Pose2(theta, Vec2(tx, ty)) {}

  static Pose2 identity() { return {}; }
  static Pose2 from_degrees(double theta_deg, double tx, double ty) {
    return {deg2rad(theta_deg), tx, ty};
  }
  static Pose2 translation(const Vec2& t) { return {0.0, t}; }
  static Pose2 rotation(double theta) { return {theta, Vec2::Zero()}; }

  double theta() const { return theta_; }
  double theta_deg() const { return rad2deg(theta_); }
  const Vec2& t() const { return t_; }
  double tx() const { return t_.x(); }
  double ty() const { return t_.y(); }

  Eigen::Matrix2d rotation_matrix() const {
    const double c = std::cos(theta_), s = std::sin(theta_);
    Eigen::Matrix2d r;
    r << c, -s, s, c;
    return r;
  }

  // 3x3 homogeneous form.
  Eigen::Matrix3d matrix() const {
    Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
    m.topLeftCorner<2, 2>() = rotation_matrix();
    m.topRightCorner<2, 1>() = t_;
    return m;
  }

  Vec2 operator*(const Vec2& p) const {
    const double c = std::cos(theta_), s = std::sin(theta_);
    return {c * p.x() - s * p.y() + t_.x(), s * p.x() + c * p.y() + t_.y()};
  }

  // Applies `b` first, then `*this`.
  Pose2 operator*(const Pose2& b) const {
    const double c = std::cos(theta_), s = std::sin(theta_);
    return {theta_ + b.theta_,
            Vec2(c * b.t_.x() - s * b.t_.y() + t_.x(), s * b.t_.x() + c * b.t_.y() + t_.y())};
  }

  Pose2 inverse() const {
    const double c = std::cos(theta_), s = std::sin(theta_);
    // -R^T t
    return {-theta_, Vec2(-(c * t_.x() + s * t_.y()), -(-s * t_.x() + c * t_.y()))};
  }

 private:
  double theta_ = 0.0;
  Vec2 t_ = Vec2::Zero();
};

inline Pose2 compose(const Pose2& a, const Pose2& b) { return a * b; }
inline Pose2 inverse(const Pose2& p) { return p.inverse(); }
inline Vec2 apply(const Pose2& p, const Vec2& x) { return p * x; }

// End-effector pose above the hole: world<-hole, hole<-peg, peg<-ee.
inline Pose2 chain_pre_insertion(const Pose2& world_hole, const Pose2& hole_peg,
                                 const Pose2& peg_ee) {
  return compose(compose(world_hole, hole_peg), peg_ee);
}

// The registration estimate maps peg-frame points into the hole frame; the
// chain needs the opposite direction in its middle slot.
inline Pose2 pre_insertion_from_estimate(const Pose2& world_hole, const Pose2& peg_to_hole,
                                         const Pose2& peg_ee) {
  return chain_pre_insertion(world_hole, inverse(peg_to_hole), peg_ee);
}

// Smallest absolute difference between two angles, radians, in [0, pi].
inline double angular_distance(double a, double b) { return std::abs(normalize_angle(a - b)); }

class SymmetryGroup {
 public:
  enum class Kind { circular, cyclic };

  static SymmetryGroup circular() { return SymmetryGroup(Kind::circular, 0); }
  static SymmetryGroup cyclic(int order) {
    if (order < 1) {
      throw Error(ErrorCategory::invalid_argument, "cyclic symmetry order must be >= 1");
    }
    return SymmetryGroup(Kind::cyclic, order);
  }

  Kind kind() const { return kind_; }
  bool is_circular() const { return kind_ == Kind::circular; }
  // Rotational order n of C_n; 0 for circular.
  int order() const { return order_; }

  bool operator==(const SymmetryGroup&) const = default;

 private:
  SymmetryGroup(Kind k, int n) : kind_(k), order_(n) {}
  Kind kind_ = Kind::cyclic;
  int order_ = 1;
};

inline double trans_error(const Pose2& est, const Pose2& gt) { return (est.t() - gt.t()).norm(); }

// Rotation error in degrees folded by the symmetry group, in [0, 180/n].
// Empty for circular symmetry, where rotation is unobservable.
inline std::optional<double> rot_error(const Pose2& est, const Pose2& gt, const SymmetryGroup& sym) {
  if (sym.is_circular()) return std::nullopt;
  const double diff = est.theta_deg() - gt.theta_deg();
  const int n = sym.order();
  double best = 180.0;
  for (int k = 0; k < n; ++k) {
    const double folded = std::abs(std::remainder(diff - k * 360.0 / n, 360.0));
    best = std::min(best, folded);
  }
  return best;
}

}  // namespace t2i
