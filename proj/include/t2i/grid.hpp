#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "t2i/error.hpp"
#include "t2i/se2.hpp"

namespace t2i {

// Physical pixel spacing of a grid, mm per pixel along x (columns) and y (rows).
struct Pitch {
  double dx = 1.0;
  double dy = 1.0;
  bool operator==(const Pitch&) const = default;
};

// GelSight Mini-like sensor. The sensor frame has its origin at the grid
// centre, x along columns and y along rows.
struct SensorModel {
  int width_px = 320;
  int height_px = 240;
  double area_x_mm = 18.6;
  double area_y_mm = 14.3;
  double press_depth_mm = 0.5;
  double gel_sigma_mm = 0.15;
  double gradient_noise_sigma = 0.02;

  Pitch pitch() const { return {area_x_mm / width_px, area_y_mm / height_px}; }
  int rows() const { return height_px; }
  int cols() const { return width_px; }

  // Position of the grid origin (pixel 0,0) in the sensor frame.
  Vec2 grid_origin() const {
    const Pitch p = pitch();
    return {-0.5 * (width_px - 1) * p.dx, -0.5 * (height_px - 1) * p.dy};
  }

  Vec2 pixel_center(int row, int col) const {
    const Pitch p = pitch();
    return grid_origin() + Vec2(col * p.dx, row * p.dy);
  }

  void validate() const {
    if (width_px <= 0 || height_px <= 0) throw Error(ErrorCategory::invalid_argument, "sensor size must be positive");
    if (!(area_x_mm > 0.0 && area_y_mm > 0.0)) {
      throw Error(ErrorCategory::invalid_argument, "sensing area must be positive");
    }
    if (!(press_depth_mm > 0.0)) throw Error(ErrorCategory::invalid_argument, "press depth must be positive");
    if (gel_sigma_mm < 0.0) throw Error(ErrorCategory::invalid_argument, "gel sigma must be >= 0");
    if (gradient_noise_sigma < 0.0) throw Error(ErrorCategory::invalid_argument, "noise sigma must be >= 0");
  }

  // A sensor whose pixel grid matches the given dimensions and pitch.
  static SensorModel from_grid(int rows, int cols, Pitch pitch) {
    SensorModel s;
    s.width_px = cols;
    s.height_px = rows;
    s.area_x_mm = cols * pitch.dx;
    s.area_y_mm = rows * pitch.dy;
    return s;
  }
};

// Row-major scalar field, units mm.
struct ScalarGrid {
  int rows = 0;
  int cols = 0;
  Pitch pitch;
  std::vector<double> values;

  ScalarGrid() = default;
  ScalarGrid(int r, int c, Pitch p, double fill = 0.0)
      : rows(r), cols(c), pitch(p), values(static_cast<std::size_t>(r) * c, fill) {}

  std::size_t size() const { return values.size(); }
  double& operator()(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
};

// Row-major slopes df/dx and df/dy (dimensionless, mm/mm).
struct GradientGrid {
  int rows = 0;
  int cols = 0;
  Pitch pitch;
  std::vector<double> gx;
  std::vector<double> gy;

  GradientGrid() = default;
  GradientGrid(int r, int c, Pitch p)
      : rows(r), cols(c), pitch(p), gx(static_cast<std::size_t>(r) * c, 0.0), gy(gx) {}

  std::size_t size() const { return gx.size(); }
  std::size_t index(int r, int c) const { return static_cast<std::size_t>(r) * cols + c; }
};

// --- T2I-GRID v1 ----------------------------------------------------------
// ASCII header "T2I-GRID v1 rows cols channels pitch_x pitch_y\n" followed by
// little-endian float64 values, row-major, channels interleaved per pixel.

struct GridFile {
  int rows = 0;
  int cols = 0;
  Pitch pitch;
  int channels = 0;
  std::vector<double> data;  // rows * cols * channels

  double at(int r, int c, int ch) const {
    return data[(static_cast<std::size_t>(r) * cols + c) * channels + ch];
  }
};

namespace detail {

inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline void write_le_double(std::ostream& os, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  std::array<char, 8> buf;
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
  os.write(buf.data(), 8);
}

inline double read_le_double(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace detail

inline void write_grid_file(const std::string& path, const GridFile& g) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCategory::io, "cannot open '" + path + "' for writing");
  os << "T2I-GRID v1 " << g.rows << ' ' << g.cols << ' ' << g.channels << ' '
     << detail::format_double(g.pitch.dx) << ' ' << detail::format_double(g.pitch.dy) << '\n';
  for (double v : g.data) detail::write_le_double(os, v);
  if (!os) throw Error(ErrorCategory::io, "write failed for '" + path + "'");
}

inline GridFile read_grid_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCategory::io, "cannot open '" + path + "'");
  std::string header;
  std::getline(is, header);
  std::istringstream hs(header);
  std::string magic, version;
  GridFile g;
  hs >> magic >> version >> g.rows >> g.cols >> g.channels >> g.pitch.dx >> g.pitch.dy;
  if (!hs || magic != "T2I-GRID" || version != "v1") {
    throw Error(ErrorCategory::io, "'" + path + "' is not a T2I-GRID v1 file");
  }
  if (g.rows <= 0 || g.cols <= 0 || g.channels <= 0) {
    throw Error(ErrorCategory::io, "'" + path + "' has invalid dimensions");
  }
  const std::size_t count = static_cast<std::size_t>(g.rows) * g.cols * g.channels;
  std::vector<unsigned char> raw(count * 8);
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(is.gcount()) != raw.size()) {
    throw Error(ErrorCategory::io, "'" + path + "' is truncated");
  }
  g.data.resize(count);
  for (std::size_t i = 0; i < count; ++i) g.data[i] = detail::read_le_double(raw.data() + 8 * i);
  return g;
}

// Packs (h, gx, gy) per pixel.
inline GridFile pack_observation(const ScalarGrid& h, const GradientGrid& g) {
  GridFile f{h.rows, h.cols, h.pitch, 3, {}};
  f.data.reserve(h.size() * 3);
  for (std::size_t i = 0; i < h.size(); ++i) {
    f.data.push_back(h.values[i]);
    f.data.push_back(g.gx[i]);
    f.data.push_back(g.gy[i]);
  }
  return f;
}

// Gradient channels are the last two of a 2- or 3-channel file.
inline GradientGrid unpack_gradients(const GridFile& f) {
  if (f.channels < 2) throw Error(ErrorCategory::io, "grid file needs at least two gradient channels");
  GradientGrid g(f.rows, f.cols, f.pitch);
  const int cx = f.channels - 2, cy = f.channels - 1;
  for (int r = 0; r < f.rows; ++r) {
    for (int c = 0; c < f.cols; ++c) {
      g.gx[g.index(r, c)] = f.at(r, c, cx);
      g.gy[g.index(r, c)] = f.at(r, c, cy);
    }
  }
  return g;
}

// One row per pixel: row,col,h,gx,gy.
inline void write_observation_csv(const std::string& path, const ScalarGrid& h, const GradientGrid& g) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCategory::io, "cannot open '" + path + "' for writing");
  os << "row,col,h,gx,gy\n" << std::setprecision(17);
  for (int r = 0; r < h.rows; ++r) {
    for (int c = 0; c < h.cols; ++c) {
      const std::size_t i = g.index(r, c);
      os << r << ',' << c << ',' << h.values[i] << ',' << g.gx[i] << ',' << g.gy[i] << '\n';
    }
  }
}

}  // namespace t2i
