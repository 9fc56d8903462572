#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "t2i/error.hpp"

namespace t2i {

template <int Dim>
using PointT = Eigen::Matrix<double, Dim, 1>;

template <int Dim>
inline double squared_distance(const PointT<Dim>& a, const PointT<Dim>& b) {
  return (a - b).squaredNorm();
}

struct Neighbor {
  std::size_t index = 0;
  double squared_distance = std::numeric_limits<double>::infinity();
};

// Exhaustive nearest neighbour, ties to the lowest index. Reference oracle
// for the grid index.
template <int Dim>
Neighbor brute_force_nearest(const std::vector<PointT<Dim>>& points, const PointT<Dim>& q) {
  Neighbor best;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double d2 = squared_distance<Dim>(points[i], q);
    if (d2 < best.squared_distance) best = {i, d2};
  }
  return best;
}

// Uniform bucket grid over a static point set. Nearest-neighbour queries are
// exact (identical to exhaustive search, including lowest-index tie breaking);
// queries may lie anywhere, inside or outside the bounding box.
template <int Dim>
class GridIndex {
 public:
  using Point = PointT<Dim>;

  explicit GridIndex(const std::vector<Point>& points, double cell_size = 0.0) : points_(points) {
    if (points_.empty()) throw Error(ErrorCategory::invalid_argument, "spatial index needs at least one point");
    lo_ = points_.front();
    Point hi = lo_;
    for (const Point& p : points_) {
      lo_ = lo_.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    const Point extent = hi - lo_;
    if (cell_size <= 0.0) {
      // Aim for ~2 points per cell over the non-degenerate axes.
      double vol = 1.0;
      int live = 0;
      for (int d = 0; d < Dim; ++d) {
        if (extent[d] > 0.0) {
          vol *= extent[d];
          ++live;
        }
      }
      cell_size = live == 0 ? 1.0 : std::pow(2.0 * vol / static_cast<double>(points_.size()), 1.0 / live);
      for (int d = 0; d < Dim; ++d) cell_size = std::max(cell_size, extent[d] / 4096.0);
      if (!(cell_size > 0.0)) cell_size = 1.0;
    }
    h_ = cell_size;
    const double max_cells = 4.0 * static_cast<double>(points_.size()) + 64.0;
    while (true) {
      double cells = 1.0;
      for (int d = 0; d < Dim; ++d) cells *= std::floor(extent[d] / h_) + 1.0;
      if (cells <= max_cells) break;
      h_ *= 1.5;
    }
    std::int64_t total = 1;
    for (int d = 0; d < Dim; ++d) {
      n_[d] = static_cast<std::int64_t>(std::floor(extent[d] / h_)) + 1;
      stride_[d] = total;
      total *= n_[d];
    }
    start_.assign(static_cast<std::size_t>(total) + 1, 0);
    std::vector<std::int64_t> cell_of(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) {
      cell_of[i] = linear(cell_coords(points_[i]));
      ++start_[static_cast<std::size_t>(cell_of[i]) + 1];
    }
    for (std::size_t c = 1; c < start_.size(); ++c) start_[c] += start_[c - 1];
    order_.resize(points_.size());
    std::vector<std::uint32_t> fill(start_.begin(), start_.end() - 1);
    for (std::size_t i = 0; i < points_.size(); ++i) {
      order_[fill[static_cast<std::size_t>(cell_of[i])]++] = static_cast<std::uint32_t>(i);
    }
  }

  std::size_t size() const { return points_.size(); }
  const std::vector<Point>& points() const { return points_; }
  double cell_size() const { return h_; }

  Neighbor nearest(const Point& q) const {
    const Coords qc = cell_coords_unclamped(q);
    // Rings closer than the box are empty; skip them.
    std::int64_t r = 0, r_max = 0;
    for (int d = 0; d < Dim; ++d) {
      r = std::max({r, -qc[d], qc[d] - (n_[d] - 1)});
      r_max = std::max({r_max, qc[d], (n_[d] - 1) - qc[d]});
    }
    Neighbor best;
    for (; r <= r_max; ++r) {
      visit_shell(qc, r, [&](std::int64_t cell) {
        for (std::uint32_t k = start_[cell]; k < start_[cell + 1]; ++k) {
          const std::uint32_t i = order_[k];
          const double d2 = squared_distance<Dim>(points_[i], q);
          if (d2 < best.squared_distance || (d2 == best.squared_distance && i < best.index)) best = {i, d2};
        }
      });
      // Any cell on ring r+1 is at least r*h away from q.
      const double bound = (static_cast<double>(r) - 1e-6) * h_;
      if (bound > 0.0 && best.squared_distance < bound * bound) break;
    }
    return best;
  }

  // Indices of all points within `radius` (inclusive), ascending.
  std::vector<std::size_t> within(const Point& q, double radius) const {
    std::vector<std::size_t> out;
    within(q, radius, out);
    return out;
  }

  void within(const Point& q, double radius, std::vector<std::size_t>& out) const {
    out.clear();
    const double r2 = radius * radius;
    Coords a, b;
    for (int d = 0; d < Dim; ++d) {
      a[d] = std::max<std::int64_t>(0, to_cell(q[d] - radius, d));
      b[d] = std::min<std::int64_t>(n_[d] - 1, to_cell(q[d] + radius, d));
      if (a[d] > b[d]) return;
    }
    visit_box(a, b, [&](std::int64_t cell) {
      for (std::uint32_t k = start_[cell]; k < start_[cell + 1]; ++k) {
        const std::uint32_t i = order_[k];
        if (squared_distance<Dim>(points_[i], q) <= r2) out.push_back(i);
      }
    });
    std::sort(out.begin(), out.end());
  }

 private:
  using Coords = std::array<std::int64_t, Dim>;

  std::int64_t to_cell(double v, int d) const {
    const double c = std::floor((v - lo_[d]) / h_);
    return static_cast<std::int64_t>(std::clamp(c, -1e15, 1e15));
  }

  Coords cell_coords_unclamped(const Point& p) const {
    Coords c;
    for (int d = 0; d < Dim; ++d) c[d] = to_cell(p[d], d);
    return c;
  }

  Coords cell_coords(const Point& p) const {
    Coords c = cell_coords_unclamped(p);
    for (int d = 0; d < Dim; ++d) c[d] = std::clamp<std::int64_t>(c[d], 0, n_[d] - 1);
    return c;
  }

  std::int64_t linear(const Coords& c) const {
    std::int64_t id = 0;
    for (int d = 0; d < Dim; ++d) id += c[d] * stride_[d];
    return id;
  }

  template <typename F>
  void visit_box(const Coords& a, const Coords& b, F&& f) const {
    Coords c = a;
    while (true) {
      f(linear(c));
      int d = 0;
      for (; d < Dim; ++d) {
        if (++c[d] <= b[d]) break;
        c[d] = a[d];
      }
      if (d == Dim) return;
    }
  }

  // Visits in-range cells whose Chebyshev distance from qc is exactly r.
  template <typename F>
  void visit_shell(const Coords& qc, std::int64_t r, F&& f) const {
    Coords c{};
    shell_axis(qc, r, 0, false, c, f);
  }

  template <typename F>
  void shell_axis(const Coords& qc, std::int64_t r, int axis, bool on_shell, Coords& c, F& f) const {
    if (axis == Dim) {
      if (on_shell || r == 0) f(linear(c));
      return;
    }
    const std::int64_t lo = std::max<std::int64_t>(qc[axis] - r, 0);
    const std::int64_t hi = std::min<std::int64_t>(qc[axis] + r, n_[axis] - 1);
    if (lo > hi) return;
    if (on_shell || axis == Dim - 1) {
      // Remaining axes unconstrained, or last axis: only the two faces unless
      // the shell condition is already satisfied.
      if (on_shell) {
        for (c[axis] = lo; c[axis] <= hi; ++c[axis]) shell_axis(qc, r, axis + 1, true, c, f);
      } else {
        for (std::int64_t v : {qc[axis] - r, qc[axis] + r}) {
          if (v < lo || v > hi) continue;
          c[axis] = v;
          shell_axis(qc, r, axis + 1, true, c, f);
          if (r == 0) break;
        }
      }
      return;
    }
    for (c[axis] = lo; c[axis] <= hi; ++c[axis]) {
      const bool face = c[axis] == qc[axis] - r || c[axis] == qc[axis] + r;
      shell_axis(qc, r, axis + 1, face, c, f);
    }
  }

  std::vector<Point> points_;
  Point lo_;
  double h_ = 1.0;
  Coords n_{};
  Coords stride_{};
  std::vector<std::uint32_t> start_;
  std::vector<std::uint32_t> order_;
};

}  // namespace t2i
