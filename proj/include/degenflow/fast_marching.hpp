#pragma once

#include <cmath>
#include <limits>
#include <queue>
#include <vector>

#include "degenflow/errors.hpp"
#include "degenflow/grid.hpp"

namespace degenflow {

// First-order fast marching for |grad d| = metric with d = 0 on the
// source cells.  Upwind quadratic update over the 4-neighbor stencil.
// Cells in a small disk around each source are initialized with
// straight-line costs (trapezoid of the endpoint metrics): the point
// source is where the distance function is singular, and seeding past it
// is what keeps the marching at clean first-order convergence.  Pass a
// target cell to stop as soon as it is accepted (the returned field is
// only valid up to that front).
inline ScalarField geodesic_distance(const Grid2D& g,
                                     const ScalarField& metric,
                                     const CellSet& sources,
                                     int target_cell = -1,
                                     double init_radius = -1.0) {
  check_same_grid(g, metric.grid, "geodesic_distance");
  if (sources.empty())
    throw std::invalid_argument("geodesic_distance: no source cells");
  for (double m : metric.values)
    if (!(m > 0.0))
      throw NonpositiveMetric("geodesic_distance: metric must be positive");
  if (init_radius < 0.0)
    init_radius = std::max(2.0 * std::max(g.hx, g.hy),
                           0.05 * std::min(g.lx, g.ly));

  const double inf = std::numeric_limits<double>::infinity();
  ScalarField d(g, inf);
  std::vector<char> accepted(static_cast<size_t>(g.cells()), 0);

  using Entry = std::pair<double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;

  const int ri = static_cast<int>(init_radius / g.hx) + 1;
  const int rj = static_cast<int>(init_radius / g.hy) + 1;
  for (int s : sources) {
    d.values[s] = 0.0;
    heap.emplace(0.0, s);
    const int si = s % g.nx, sj = s / g.nx;
    for (int dj = -rj; dj <= rj; ++dj)
      for (int di = -ri; di <= ri; ++di) {
        const int i = si + di, j = sj + dj;
        if (i < 0 || i >= g.nx || j < 0 || j >= g.ny || (di == 0 && dj == 0))
          continue;
        const double dist = std::hypot(di * g.hx, dj * g.hy);
        if (dist > init_radius) continue;
        const int c = g.cell(i, j);
        const double v = 0.5 * (metric.values[s] + metric.values[c]) * dist;
        if (v < d.values[c]) {
          d.values[c] = v;
          heap.emplace(v, c);
        }
      }
  }

  auto solve_cell = [&](int i, int j) {
    double ax = inf, ay = inf;  // smallest accepted value per axis
    if (i > 0 && accepted[g.cell(i - 1, j)]) ax = d.values[g.cell(i - 1, j)];
    if (i + 1 < g.nx && accepted[g.cell(i + 1, j)])
      ax = std::min(ax, d.values[g.cell(i + 1, j)]);
    if (j > 0 && accepted[g.cell(i, j - 1)]) ay = d.values[g.cell(i, j - 1)];
    if (j + 1 < g.ny && accepted[g.cell(i, j + 1)])
      ay = std::min(ay, d.values[g.cell(i, j + 1)]);
    const double m = metric(i, j);
    double best = inf;
    if (std::isfinite(ax)) best = ax + m * g.hx;
    if (std::isfinite(ay)) best = std::min(best, ay + m * g.hy);
    if (std::isfinite(ax) && std::isfinite(ay)) {
      // (t-ax)^2/hx^2 + (t-ay)^2/hy^2 = m^2
      const double ix = 1.0 / (g.hx * g.hx), iy = 1.0 / (g.hy * g.hy);
      const double qa = ix + iy;
      const double qb = -2.0 * (ax * ix + ay * iy);
      const double qc = ax * ax * ix + ay * ay * iy - m * m;
      const double disc = qb * qb - 4.0 * qa * qc;
      if (disc >= 0.0) {
        const double t = (-qb + std::sqrt(disc)) / (2.0 * qa);
        if (t >= std::max(ax, ay)) best = std::min(best, t);
      }
    }
    return best;
  };

  while (!heap.empty()) {
    const auto [dist, c] = heap.top();
    heap.pop();
    if (accepted[c] || dist > d.values[c]) continue;
    accepted[c] = 1;
    if (c == target_cell) break;
    const int i = c % g.nx, j = c / g.nx;
    const int ni[4] = {i - 1, i + 1, i, i};
    const int nj[4] = {j, j, j - 1, j + 1};
    for (int k = 0; k < 4; ++k) {
      if (ni[k] < 0 || ni[k] >= g.nx || nj[k] < 0 || nj[k] >= g.ny) continue;
      const int n = g.cell(ni[k], nj[k]);
      if (accepted[n]) continue;
      const double v = solve_cell(ni[k], nj[k]);
      if (v < d.values[n]) {
        d.values[n] = v;
        heap.emplace(v, n);
      }
    }
  }
  return d;
}

}  // namespace degenflow
