#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "degenflow/errors.hpp"

namespace degenflow {

// Uniform MAC-staggered rectangle: scalars at cell centers, x-components
// of vector fields on vertical faces, y-components on horizontal faces.
// This placement makes zero normal flux exactly representable and the
// discrete gradient/divergence pair exactly adjoint, which the duality
// certificates downstream rely on.
struct Grid2D {
  int nx = 0, ny = 0;
  double lx = 0.0, ly = 0.0;
  double hx = 0.0, hy = 0.0;

  Grid2D() = default;
  Grid2D(int nx_, int ny_, double lx_, double ly_)
      : nx(nx_), ny(ny_), lx(lx_), ly(ly_) {
    if (nx < 4 || ny < 4 || nx * ny < 16)
      throw std::invalid_argument("Grid2D: need nx, ny >= 4");
    if (!(lx > 0.0) || !(ly > 0.0))
      throw std::invalid_argument("Grid2D: need positive side lengths");
    hx = lx / nx;
    hy = ly / ny;
  }

  bool operator==(const Grid2D& o) const {
    return nx == o.nx && ny == o.ny && lx == o.lx && ly == o.ly;
  }
  bool operator!=(const Grid2D& o) const { return !(*this == o); }

  int cells() const { return nx * ny; }
  int xfaces() const { return (nx + 1) * ny; }
  int yfaces() const { return nx * (ny + 1); }
  double cell_area() const { return hx * hy; }

  int cell(int i, int j) const { return j * nx + i; }
  int xface(int i, int j) const { return j * (nx + 1) + i; }
  int yface(int i, int j) const { return j * nx + i; }

  double cx(int i) const { return (i + 0.5) * hx; }  // cell-center x
  double cy(int j) const { return (j + 0.5) * hy; }
  Eigen::Vector2d cell_center(int c) const {
    return {cx(c % nx), cy(c / nx)};
  }
};

inline void check_same_grid(const Grid2D& a, const Grid2D& b,
                            const char* where) {
  if (a != b) throw GridMismatch(std::string(where) + ": grids differ");
}

struct ScalarField {
  Grid2D grid;
  std::vector<double> values;  // row-major, cell centers

  ScalarField() = default;
  explicit ScalarField(const Grid2D& g, double fill = 0.0)
      : grid(g), values(static_cast<size_t>(g.cells()), fill) {}

  double& operator()(int i, int j) { return values[grid.cell(i, j)]; }
  double operator()(int i, int j) const { return values[grid.cell(i, j)]; }

  double sum_weighted() const {  // integral over the domain
    double s = 0.0;
    for (double v : values) s += v;
    return s * grid.cell_area();
  }
  double mean() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s / values.size();
  }
  void subtract_mean() {
    const double m = mean();
    for (double& v : values) v -= m;
  }
  double max_abs() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
  }
  double norm_l2() const {  // grid L2 norm, area-weighted
    double s = 0.0;
    for (double v : values) s += v * v;
    return std::sqrt(s * grid.cell_area());
  }
  double norm_l1() const {
    double s = 0.0;
    for (double v : values) s += std::abs(v);
    return s * grid.cell_area();
  }
  bool all_finite() const {
    for (double v : values)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

struct VectorField {
  Grid2D grid;
  std::vector<double> x;  // (nx+1) * ny vertical-face components
  std::vector<double> y;  // nx * (ny+1) horizontal-face components
  bool neumann = false;   // if set, boundary-face components are exactly 0

  VectorField() = default;
  explicit VectorField(const Grid2D& g, bool neumann_flag = false)
      : grid(g),
        x(static_cast<size_t>(g.xfaces()), 0.0),
        y(static_cast<size_t>(g.yfaces()), 0.0),
        neumann(neumann_flag) {}

  double& fx(int i, int j) { return x[grid.xface(i, j)]; }
  double fx(int i, int j) const { return x[grid.xface(i, j)]; }
  double& fy(int i, int j) { return y[grid.yface(i, j)]; }
  double fy(int i, int j) const { return y[grid.yface(i, j)]; }

  void clamp_boundary() {
    for (int j = 0; j < grid.ny; ++j) fx(0, j) = fx(grid.nx, j) = 0.0;
    for (int i = 0; i < grid.nx; ++i) fy(i, 0) = fy(i, grid.ny) = 0.0;
  }
  bool boundary_is_zero() const {
    for (int j = 0; j < grid.ny; ++j)
      if (fx(0, j) != 0.0 || fx(grid.nx, j) != 0.0) return false;
    for (int i = 0; i < grid.nx; ++i)
      if (fy(i, 0) != 0.0 || fy(i, grid.ny) != 0.0) return false;
    return true;
  }

  double norm_l2() const {
    double s = 0.0;
    for (double v : x) s += v * v;
    for (double v : y) s += v * v;
    return std::sqrt(s * grid.cell_area());
  }
  double max_abs() const {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::abs(v));
    for (double v : y) m = std::max(m, std::abs(v));
    return m;
  }
};

// face-difference gradient; boundary faces 0 (the Neumann-compatible
// variant additionally stamps the flag so downstream ops may rely on
// sigma . n = 0)
inline VectorField gradient(const Grid2D& g, const ScalarField& u,
                            bool neumann = true) {
  check_same_grid(g, u.grid, "gradient");
  VectorField out(g, neumann);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 1; i < g.nx; ++i)
      out.fx(i, j) = (u(i, j) - u(i - 1, j)) / g.hx;
  for (int j = 1; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      out.fy(i, j) = (u(i, j) - u(i, j - 1)) / g.hy;
  return out;
}

inline ScalarField divergence(const Grid2D& g, const VectorField& s) {
  check_same_grid(g, s.grid, "divergence");
  ScalarField out(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      out(i, j) = (s.fx(i + 1, j) - s.fx(i, j)) / g.hx +
                  (s.fy(i, j + 1) - s.fy(i, j)) / g.hy;
  return out;
}

// MAC inner products (area-weighted)
inline double dot_cells(const ScalarField& a, const ScalarField& b) {
  check_same_grid(a.grid, b.grid, "dot_cells");
  double s = 0.0;
  for (size_t k = 0; k < a.values.size(); ++k) s += a.values[k] * b.values[k];
  return s * a.grid.cell_area();
}

inline double dot_faces(const VectorField& a, const VectorField& b) {
  check_same_grid(a.grid, b.grid, "dot_faces");
  double s = 0.0;
  for (size_t k = 0; k < a.x.size(); ++k) s += a.x[k] * b.x[k];
  for (size_t k = 0; k < a.y.size(); ++k) s += a.y[k] * b.y[k];
  return s * a.grid.cell_area();
}

// cell-centered reconstruction of a face field (component-wise averaging
// of the two bracketing faces)
inline void colocate_at_cell(const VectorField& s, int i, int j, double& vx,
                             double& vy) {
  vx = 0.5 * (s.fx(i, j) + s.fx(i + 1, j));
  vy = 0.5 * (s.fy(i, j) + s.fy(i, j + 1));
}

inline ScalarField colocated_magnitude(const Grid2D& g, const VectorField& s) {
  check_same_grid(g, s.grid, "colocated_magnitude");
  ScalarField out(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      double vx, vy;
      colocate_at_cell(s, i, j, vx, vy);
      out(i, j) = std::hypot(vx, vy);
    }
  return out;
}

// --- regions -------------------------------------------------------------

using CellSet = std::vector<int>;

inline CellSet ball_region(const Grid2D& g, const Eigen::Vector2d& center,
                           double r) {
  if (!(r > 0.0)) throw std::invalid_argument("ball_region: r > 0");
  if (center.x() < 0.0 || center.x() > g.lx || center.y() < 0.0 ||
      center.y() > g.ly)
    throw RegionOutOfDomain("ball_region: center outside the domain");
  CellSet cells;
  const double r2 = r * r;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const double dx = g.cx(i) - center.x(), dy = g.cy(j) - center.y();
      if (dx * dx + dy * dy <= r2) cells.push_back(g.cell(i, j));
    }
  if (cells.empty()) throw EmptyRegion("ball_region: no cell centers inside");
  return cells;
}

inline CellSet annulus_region(const Grid2D& g, const Eigen::Vector2d& center,
                              double r_in, double r_out) {
  if (!(r_in >= 0.0) || !(r_out > r_in))
    throw std::invalid_argument("annulus_region: need 0 <= r_in < r_out");
  if (center.x() < 0.0 || center.x() > g.lx || center.y() < 0.0 ||
      center.y() > g.ly)
    throw RegionOutOfDomain("annulus_region: center outside the domain");
  CellSet cells;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const double dx = g.cx(i) - center.x(), dy = g.cy(j) - center.y();
      const double d2 = dx * dx + dy * dy;
      if (d2 > r_in * r_in && d2 <= r_out * r_out)
        cells.push_back(g.cell(i, j));
    }
  if (cells.empty())
    throw EmptyRegion("annulus_region: no cell centers inside");
  return cells;
}

}  // namespace degenflow
