#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "t2i/connector.hpp"
#include "t2i/error.hpp"
#include "t2i/grid.hpp"
#include "t2i/se2.hpp"

namespace t2i {

enum class ContactSide { peg, hole };

struct ContactObservation {
  ScalarGrid height;       // noise-free indentation, mm
  GradientGrid gradients;  // noisy slopes, the pipeline input
  Pose2 true_pose;         // shape pose in the sensor frame
  ContactSide side = ContactSide::peg;
};

// Central differences inside, one-sided at the border, scaled by pitch.
inline GradientGrid gradients_from_height(const ScalarGrid& h) {
  if (h.rows < 3 || h.cols < 3) throw Error(ErrorCategory::invalid_argument, "gradient grid must be at least 3x3");
  GradientGrid g(h.rows, h.cols, h.pitch);
  const double dx = h.pitch.dx, dy = h.pitch.dy;
  for (int r = 0; r < h.rows; ++r) {
    for (int c = 0; c < h.cols; ++c) {
      double gx;
      if (c == 0) {
        gx = (h(r, 1) - h(r, 0)) / dx;
      } else if (c == h.cols - 1) {
        gx = (h(r, c) - h(r, c - 1)) / dx;
      } else {
        gx = (h(r, c + 1) - h(r, c - 1)) / (2.0 * dx);
      }
      double gy;
      if (r == 0) {
        gy = (h(1, c) - h(0, c)) / dy;
      } else if (r == h.rows - 1) {
        gy = (h(r, c) - h(r - 1, c)) / dy;
      } else {
        gy = (h(r + 1, c) - h(r - 1, c)) / (2.0 * dy);
      }
      g.gx[g.index(r, c)] = gx;
      g.gy[g.index(r, c)] = gy;
    }
  }
  return g;
}

inline GradientGrid add_noise(GradientGrid g, double sigma, std::uint64_t seed) {
  if (sigma < 0.0) throw Error(ErrorCategory::invalid_argument, "noise sigma must be >= 0");
  if (sigma == 0.0) return g;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma);
  for (std::size_t i = 0; i < g.size(); ++i) {
    g.gx[i] += n(rng);
    g.gy[i] += n(rng);
  }
  return g;
}

namespace detail {

// Mirror index with the edge sample repeated: (d c b a | a b c d | d c b a).
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

inline std::vector<double> gaussian_kernel(double sigma_px) {
  const int radius = static_cast<int>(std::ceil(4.0 * sigma_px));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma_px * sigma_px));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

}  // namespace detail

// Separable Gaussian blur of radius sigma_mm with reflective borders.
inline ScalarGrid gaussian_blur(const ScalarGrid& in, double sigma_mm) {
  if (sigma_mm <= 0.0) return in;
  const auto kx = detail::gaussian_kernel(sigma_mm / in.pitch.dx);
  const auto ky = detail::gaussian_kernel(sigma_mm / in.pitch.dy);
  const int rx = static_cast<int>(kx.size() / 2), ry = static_cast<int>(ky.size() / 2);
  ScalarGrid tmp(in.rows, in.cols, in.pitch);
  for (int r = 0; r < in.rows; ++r) {
    for (int c = 0; c < in.cols; ++c) {
      double acc = 0.0;
      for (int k = -rx; k <= rx; ++k) acc += kx[static_cast<std::size_t>(k + rx)] * in(r, detail::reflect_index(c + k, in.cols));
      tmp(r, c) = acc;
    }
  }
  ScalarGrid out(in.rows, in.cols, in.pitch);
  for (int r = 0; r < in.rows; ++r) {
    for (int c = 0; c < in.cols; ++c) {
      double acc = 0.0;
      for (int k = -ry; k <= ry; ++k) acc += ky[static_cast<std::size_t>(k + ry)] * tmp(detail::reflect_index(r + k, in.rows), c);
      out(r, c) = acc;
    }
  }
  return out;
}

// Throws when the placed outer boundary leaves the sensing area.
inline void check_footprint(const CrossSection& shape, const Pose2& pose, const SensorModel& sensor) {
  const double hx = 0.5 * sensor.area_x_mm, hy = 0.5 * sensor.area_y_mm;
  const bool fits = support(shape, pose, {1.0, 0.0}) <= hx && support(shape, pose, {-1.0, 0.0}) <= hx &&
                    support(shape, pose, {0.0, 1.0}) <= hy && support(shape, pose, {0.0, -1.0}) <= hy;
  if (!fits) {
    throw Error(ErrorCategory::assumption_violation,
                "contact footprint exceeds the sensing area (the whole cross-section must lie on the sensor)");
  }
}

// Binary contact indicator before gel blur. Peg: depth inside the shape;
// hole: depth on the face around the opening.
inline ScalarGrid contact_indicator(const CrossSection& shape, const Pose2& pose, const SensorModel& sensor,
                                    ContactSide side) {
  const Pose2 to_shape = pose.inverse();
  ScalarGrid h(sensor.rows(), sensor.cols(), sensor.pitch());
  for (int r = 0; r < h.rows; ++r) {
    for (int c = 0; c < h.cols; ++c) {
      const bool inside = contains(shape, to_shape * sensor.pixel_center(r, c));
      const bool pressed = side == ContactSide::peg ? inside : !inside;
      h(r, c) = pressed ? sensor.press_depth_mm : 0.0;
    }
  }
  return h;
}

inline ContactObservation render_contact(const CrossSection& shape, const Pose2& pose, const SensorModel& sensor,
                                         ContactSide side, std::uint64_t noise_seed = 0) {
  sensor.validate();
  check_footprint(shape, pose, sensor);
  ContactObservation obs;
  obs.height = gaussian_blur(contact_indicator(shape, pose, sensor, side), sensor.gel_sigma_mm);
  obs.gradients = add_noise(gradients_from_height(obs.height), sensor.gradient_noise_sigma, noise_seed);
  obs.true_pose = pose;
  obs.side = side;
  return obs;
}

inline ContactObservation render_peg_contact(const CrossSection& shape, const Pose2& pose, const SensorModel& sensor,
                                             std::uint64_t noise_seed = 0) {
  return render_contact(shape, pose, sensor, ContactSide::peg, noise_seed);
}

inline ContactObservation render_hole_contact(const CrossSection& shape, const Pose2& pose,
                                              const SensorModel& sensor, std::uint64_t noise_seed = 0) {
  return render_contact(shape, pose, sensor, ContactSide::hole, noise_seed);
}

// Hole offsets of the simulation study: dx, dy in {-4..-1, 1..4} mm and
// dtheta in {0, 45, ..., 315} deg; x-major, then y, then theta.
inline std::vector<Pose2> perturbation_grid() {
  static constexpr double kSteps[] = {-4.0, -3.0, -2.0, -1.0, 1.0, 2.0, 3.0, 4.0};
  std::vector<Pose2> out;
  out.reserve(512);
  for (double dx : kSteps) {
    for (double dy : kSteps) {
      for (int k = 0; k < 8; ++k) out.push_back(Pose2::from_degrees(45.0 * k, dx, dy));
    }
  }
  return out;
}

// dx, dy ~ U(-4, 4) mm, dtheta ~ U(0, 360) deg.
inline Pose2 random_perturbation(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> shift(-4.0, 4.0);
  std::uniform_real_distribution<double> angle(0.0, 360.0);
  const double dx = shift(rng);
  const double dy = shift(rng);
  return Pose2::from_degrees(angle(rng), dx, dy);
}

}  // namespace t2i
