#pragma once

#include <cmath>
#include <string>

#include <json.hpp>

#include "degenflow/errors.hpp"
#include "degenflow/grid.hpp"

namespace degenflow {

struct SourceResult {
  ScalarField field;
  double subtracted_mean = 0.0;
};

// Analytic right-hand sides evaluated at cell centers and mean-subtracted
// to meet the Neumann compatibility condition; the subtraction amount is
// part of the result so runs can report it.
inline SourceResult builtin_sources(const Grid2D& g, const std::string& name,
                                    const nlohmann::json& params_in = {}) {
  const nlohmann::json params =
      params_in.is_null() ? nlohmann::json::object() : params_in;
  ScalarField f(g);
  const double amp = params.value("amplitude", 1.0);

  if (name == "two-blocks") {
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i)
        f(i, j) = g.cx(i) < 0.5 * g.lx ? amp : -amp;
  } else if (name == "four-quadrant") {
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i)
        f(i, j) = ((g.cx(i) < 0.5 * g.lx) == (g.cy(j) < 0.5 * g.ly)) ? amp
                                                                     : -amp;
  } else if (name == "gaussian-dipole") {
    const double s = params.value("sigma", 0.08 * std::min(g.lx, g.ly));
    const double c1x = params.value("c1x", 0.3 * g.lx);
    const double c1y = params.value("c1y", 0.5 * g.ly);
    const double c2x = params.value("c2x", 0.7 * g.lx);
    const double c2y = params.value("c2y", 0.5 * g.ly);
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const double x = g.cx(i), y = g.cy(j);
        const double d1 = (x - c1x) * (x - c1x) + (y - c1y) * (y - c1y);
        const double d2 = (x - c2x) * (x - c2x) + (y - c2y) * (y - c2y);
        f(i, j) = amp * (std::exp(-0.5 * d1 / (s * s)) -
                         std::exp(-0.5 * d2 / (s * s)));
      }
  } else if (name == "annular-ring") {
    const double cx = params.value("cx", 0.5 * g.lx);
    const double cy = params.value("cy", 0.5 * g.ly);
    const double r1 = params.value("r1", 0.15 * std::min(g.lx, g.ly));
    const double r2 = params.value("r2", 0.25 * std::min(g.lx, g.ly));
    const double r3 = params.value("r3", 0.35 * std::min(g.lx, g.ly));
    if (!(0.0 < r1 && r1 < r2 && r2 < r3))
      throw ConfigInvalid("annular-ring: need 0 < r1 < r2 < r3");
    int n_disk = 0, n_ring = 0;
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const double d = std::hypot(g.cx(i) - cx, g.cy(j) - cy);
        if (d <= r1) ++n_disk;
        if (d > r2 && d <= r3) ++n_ring;
      }
    if (n_disk == 0 || n_ring == 0)
      throw ConfigInvalid("annular-ring: empty disk or ring at this grid");
    const double neg = amp * static_cast<double>(n_disk) / n_ring;
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const double d = std::hypot(g.cx(i) - cx, g.cy(j) - cy);
        f(i, j) = d <= r1 ? amp : (d > r2 && d <= r3 ? -neg : 0.0);
      }
  } else {
    throw UnknownSource("builtin_sources: no source named '" + name + "'");
  }

  const double m = f.mean();
  f.subtract_mean();
  return {std::move(f), m};
}

}  // namespace degenflow
