#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <fftw3.h>

#include "t2i/error.hpp"
#include "t2i/grid.hpp"
#include "t2i/se2.hpp"

namespace t2i {

using PointCloud3 = std::vector<Vec3>;

struct PoissonOptions {
  double rel_tolerance = 1e-8;
  double abs_tolerance = 1e-12;  // used when the right-hand side vanishes
  int max_cg_iterations = 5000;
};

// Divergence d(gx)/dx + d(gy)/dy with central differences, evaluated on the
// interior pixels (the border row/column stays zero).
inline ScalarGrid divergence(const GradientGrid& g) {
  ScalarGrid d(g.rows, g.cols, g.pitch);
  const double dx = g.pitch.dx, dy = g.pitch.dy;
  for (int r = 1; r + 1 < g.rows; ++r) {
    for (int c = 1; c + 1 < g.cols; ++c) {
      d(r, c) = (g.gx[g.index(r, c + 1)] - g.gx[g.index(r, c - 1)]) / (2.0 * dx) +
                (g.gy[g.index(r + 1, c)] - g.gy[g.index(r - 1, c)]) / (2.0 * dy);
    }
  }
  return d;
}

// 5-point Laplacian of f on the interior pixels, with f taken as given on
// the border.
inline ScalarGrid laplacian(const ScalarGrid& f) {
  ScalarGrid l(f.rows, f.cols, f.pitch);
  const double ix2 = 1.0 / (f.pitch.dx * f.pitch.dx), iy2 = 1.0 / (f.pitch.dy * f.pitch.dy);
  for (int r = 1; r + 1 < f.rows; ++r) {
    for (int c = 1; c + 1 < f.cols; ++c) {
      l(r, c) = (f(r, c + 1) - 2.0 * f(r, c) + f(r, c - 1)) * ix2 + (f(r + 1, c) - 2.0 * f(r, c) + f(r - 1, c)) * iy2;
    }
  }
  return l;
}

// Returns (||lap f - rhs||_2, ||rhs||_2) over interior pixels.
inline std::pair<double, double> poisson_residual(const ScalarGrid& f, const ScalarGrid& rhs) {
  const ScalarGrid l = laplacian(f);
  double res = 0.0, norm = 0.0;
  for (int r = 1; r + 1 < f.rows; ++r) {
    for (int c = 1; c + 1 < f.cols; ++c) {
      const double e = l(r, c) - rhs(r, c);
      res += e * e;
      norm += rhs(r, c) * rhs(r, c);
    }
  }
  return {std::sqrt(res), std::sqrt(norm)};
}

namespace detail {

struct FftwBuffer {
  double* ptr = nullptr;
  explicit FftwBuffer(std::size_t n) : ptr(static_cast<double*>(fftw_malloc(sizeof(double) * n))) {
    if (!ptr) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(ptr); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
};

// FFTW planning is not thread-safe; plans are created once per size under a
// lock and executed concurrently through the new-array interface.
class DstPlanCache {
 public:
  static fftw_plan get(int n0, int n1) {
    static DstPlanCache cache;
    std::lock_guard<std::mutex> lock(cache.mutex_);
    auto it = cache.plans_.find({n0, n1});
    if (it != cache.plans_.end()) return it->second;
    FftwBuffer in(static_cast<std::size_t>(n0) * n1), out(static_cast<std::size_t>(n0) * n1);
    fftw_plan p = fftw_plan_r2r_2d(n0, n1, in.ptr, out.ptr, FFTW_RODFT00, FFTW_RODFT00, FFTW_ESTIMATE);
    cache.plans_.emplace(std::make_pair(n0, n1), p);
    return p;
  }

  ~DstPlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

 private:
  std::mutex mutex_;
  std::map<std::pair<int, int>, fftw_plan> plans_;
};

}  // namespace detail

// Direct solve of lap f = rhs on the interior with f = 0 on the border, by
// diagonalising the 5-point Laplacian with a 2D type-I sine transform.
inline ScalarGrid solve_poisson_dst(const ScalarGrid& rhs) {
  if (rhs.rows < 3 || rhs.cols < 3) throw Error(ErrorCategory::invalid_argument, "Poisson grid must be at least 3x3");
  const int n0 = rhs.rows - 2, n1 = rhs.cols - 2;
  const std::size_t n = static_cast<std::size_t>(n0) * n1;
  detail::FftwBuffer a(n), b(n);
  for (int r = 0; r < n0; ++r) {
    for (int c = 0; c < n1; ++c) a.ptr[static_cast<std::size_t>(r) * n1 + c] = rhs(r + 1, c + 1);
  }
  fftw_plan plan = detail::DstPlanCache::get(n0, n1);
  fftw_execute_r2r(plan, a.ptr, b.ptr);

  const double ix2 = 1.0 / (rhs.pitch.dx * rhs.pitch.dx), iy2 = 1.0 / (rhs.pitch.dy * rhs.pitch.dy);
  std::vector<double> ey(static_cast<std::size_t>(n0)), ex(static_cast<std::size_t>(n1));
  for (int k = 0; k < n0; ++k) ey[k] = (2.0 * std::cos(kPi * (k + 1) / (n0 + 1)) - 2.0) * iy2;
  for (int l = 0; l < n1; ++l) ex[l] = (2.0 * std::cos(kPi * (l + 1) / (n1 + 1)) - 2.0) * ix2;
  const double scale = 1.0 / (4.0 * (n0 + 1) * (n1 + 1));
  for (int k = 0; k < n0; ++k) {
    for (int l = 0; l < n1; ++l) b.ptr[static_cast<std::size_t>(k) * n1 + l] *= scale / (ey[k] + ex[l]);
  }
  fftw_execute_r2r(plan, b.ptr, a.ptr);

  ScalarGrid f(rhs.rows, rhs.cols, rhs.pitch);
  for (int r = 0; r < n0; ++r) {
    for (int c = 0; c < n1; ++c) f(r + 1, c + 1) = a.ptr[static_cast<std::size_t>(r) * n1 + c];
  }
  return f;
}

// Conjugate gradients on -lap f = -rhs (SPD), zero border, warm-started from
// `f`. Returns the final residual norm.
inline double refine_poisson_cg(ScalarGrid& f, const ScalarGrid& rhs, double tol_abs, int max_iter) {
  auto apply_neg_lap = [](const ScalarGrid& x) {
    ScalarGrid y = laplacian(x);
    for (double& v : y.values) v = -v;
    return y;
  };
  auto dot = [](const ScalarGrid& a, const ScalarGrid& b) {
    double s = 0.0;
    for (int r = 1; r + 1 < a.rows; ++r) {
      for (int c = 1; c + 1 < a.cols; ++c) s += a(r, c) * b(r, c);
    }
    return s;
  };
  ScalarGrid res = apply_neg_lap(f);
  for (int r = 1; r + 1 < f.rows; ++r) {
    for (int c = 1; c + 1 < f.cols; ++c) res(r, c) = -rhs(r, c) - res(r, c);
  }
  ScalarGrid p = res;
  double rr = dot(res, res);
  for (int it = 0; it < max_iter && std::sqrt(rr) > tol_abs; ++it) {
    const ScalarGrid ap = apply_neg_lap(p);
    const double alpha = rr / dot(p, ap);
    for (int r = 1; r + 1 < f.rows; ++r) {
      for (int c = 1; c + 1 < f.cols; ++c) {
        f(r, c) += alpha * p(r, c);
        res(r, c) -= alpha * ap(r, c);
      }
    }
    const double rr_next = dot(res, res);
    const double beta = rr_next / rr;
    rr = rr_next;
    for (int r = 1; r + 1 < f.rows; ++r) {
      for (int c = 1; c + 1 < f.cols; ++c) p(r, c) = res(r, c) + beta * p(r, c);
    }
  }
  return poisson_residual(f, rhs).first;
}

// Height map whose gradient best matches g: solves lap f = div g with zero
// Dirichlet border. Falls back to CG refinement if the direct solve misses
// the residual tolerance.
inline ScalarGrid integrate_gradients(const GradientGrid& g, const PoissonOptions& opt = {}) {
  if (g.rows < 3 || g.cols < 3) throw Error(ErrorCategory::invalid_argument, "gradient grid must be at least 3x3");
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!std::isfinite(g.gx[i]) || !std::isfinite(g.gy[i])) {
      throw Error(ErrorCategory::invalid_argument, "gradient grid has non-finite entries");
    }
  }
  const ScalarGrid rhs = divergence(g);
  ScalarGrid f = solve_poisson_dst(rhs);
  auto [res, norm] = poisson_residual(f, rhs);
  const double tol = norm > 0.0 ? opt.rel_tolerance * norm : opt.abs_tolerance;
  if (res <= tol) return f;
  res = refine_poisson_cg(f, rhs, tol, opt.max_cg_iterations);
  if (res > tol) {
    std::ostringstream msg;
    msg << "Poisson solve did not converge: residual " << res << " > " << tol;
    throw Error(ErrorCategory::solver, msg.str());
  }
  return f;
}

// One point per pixel at (col * dx, row * dy, h).
inline PointCloud3 height_to_cloud(const ScalarGrid& h) {
  PointCloud3 cloud;
  cloud.reserve(h.size());
  for (int r = 0; r < h.rows; ++r) {
    for (int c = 0; c < h.cols; ++c) cloud.emplace_back(c * h.pitch.dx, r * h.pitch.dy, h(r, c));
  }
  return cloud;
}

struct MaeReport {
  double mae_gx = 0.0;
  double mae_gy = 0.0;
  double mae_theta_x = 0.0;  // degrees
  double mae_theta_y = 0.0;  // degrees
};

// Gradient-map error. Slopes are min-max normalised to [0, 1] per channel
// over the union of both maps before the absolute error is averaged; slope
// angles atan(G) are compared unnormalised, in degrees.
inline MaeReport gradient_mae(const GradientGrid& pred, const GradientGrid& gt) {
  if (pred.rows != gt.rows || pred.cols != gt.cols) {
    throw Error(ErrorCategory::invalid_argument, "gradient_mae: dimension mismatch");
  }
  const std::size_t n = gt.size();
  auto channel_mae = [n](const std::vector<double>& a, const std::vector<double>& b) {
    const auto [amin, amax] = std::minmax_element(a.begin(), a.end());
    const auto [bmin, bmax] = std::minmax_element(b.begin(), b.end());
    const double lo = std::min(*amin, *bmin), hi = std::max(*amax, *bmax);
    const double span = hi - lo;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += std::abs(a[i] - b[i]);
    return span > 0.0 ? sum / (span * n) : 0.0;
  };
  auto angle_mae = [n](const std::vector<double>& a, const std::vector<double>& b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += std::abs(rad2deg(std::atan(a[i])) - rad2deg(std::atan(b[i])));
    return sum / n;
  };
  MaeReport rep;
  if (n == 0) return rep;
  rep.mae_gx = channel_mae(pred.gx, gt.gx);
  rep.mae_gy = channel_mae(pred.gy, gt.gy);
  rep.mae_theta_x = angle_mae(pred.gx, gt.gx);
  rep.mae_theta_y = angle_mae(pred.gy, gt.gy);
  return rep;
}

inline void write_cloud_csv(const std::string& path, const PointCloud3& cloud) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCategory::io, "cannot open '" + path + "' for writing");
  os << "x_mm,y_mm,z_mm\n" << std::setprecision(17);
  for (const Vec3& p : cloud) os << p.x() << ',' << p.y() << ',' << p.z() << '\n';
}

inline void write_cloud_csv(const std::string& path, const std::vector<Vec2>& cloud) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCategory::io, "cannot open '" + path + "' for writing");
  os << "x_mm,y_mm\n" << std::setprecision(17);
  for (const Vec2& p : cloud) os << p.x() << ',' << p.y() << '\n';
}

}  // namespace t2i
