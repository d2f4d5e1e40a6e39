#pragma once

#include <iostream>
#include <vector>

#include <json.hpp>

#include "degenflow/energy.hpp"
#include "degenflow/errors.hpp"
#include "degenflow/grid.hpp"
#include "degenflow/poisson.hpp"
#include "degenflow/potential.hpp"
#include "degenflow/primal.hpp"

namespace degenflow {

struct DualParams {
  double tau = 1.0;       // splitting step
  double tol = 1e-7;      // iterate-change stopping threshold (relative)
  int max_iter = 50000;
  bool adapt_tau = false; // residual-balancing adjustment of tau
  bool best_effort = false;  // return the feasible iterate at the cap
                             // instead of throwing (truncated-run studies)
  bool quiet = true;
};

struct DualSolution {
  VectorField sigma_bar;
  double objective = 0.0;
  double feas_residual = 0.0;   // L2 of div sigma_bar - f
  double split_residual = 0.0;  // L2 distance between the two half-steps
  int iterations = 0;
};

namespace detail {

// Shrinkage step of the splitting: face components are averaged to cell
// corners, the corner vector is shrunk radially by prox of tau H*, and the
// scalar shrink factors are averaged back onto the faces.  The corner
// placement keeps the radial symmetry of the shrinkage on the staggered
// components.
inline VectorField corner_shrink(const Grid2D& g, const PotentialSpec& spec,
                                 const VectorField& s, double tau) {
  const int nx = g.nx, ny = g.ny;
  Eigen::MatrixXd factor(ny + 1, nx + 1);
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) {
      // x-faces (i, j-1), (i, j); y-faces (i-1, j), (i, j); one-sided at
      // the boundary
      double vx = 0.0, vy = 0.0;
      int cx = 0, cy = 0;
      if (j >= 1) vx += s.fx(i, j - 1), ++cx;
      if (j <= ny - 1) vx += s.fx(i, j), ++cx;
      if (i >= 1) vy += s.fy(i - 1, j), ++cy;
      if (i <= nx - 1) vy += s.fy(i, j), ++cy;
      const Vec2 v(vx / cx, vy / cy);
      const double n = v.norm();
      factor(j, i) = n > 0.0 ? prox_conjugate(spec, v, tau).norm() / n : 0.0;
    }
  VectorField out(g, /*neumann=*/true);
  for (int j = 0; j < ny; ++j)
    for (int i = 1; i < nx; ++i)
      out.fx(i, j) = s.fx(i, j) * 0.5 * (factor(j, i) + factor(j + 1, i));
  for (int j = 1; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      out.fy(i, j) = s.fy(i, j) * 0.5 * (factor(j, i) + factor(j, i + 1));
  return out;
}

inline double field_distance(const VectorField& a, const VectorField& b) {
  double s = 0.0;
  for (size_t k = 0; k < a.x.size(); ++k) {
    const double d = a.x[k] - b.x[k];
    s += d * d;
  }
  for (size_t k = 0; k < a.y.size(); ++k) {
    const double d = a.y[k] - b.y[k];
    s += d * d;
  }
  return std::sqrt(s * a.grid.cell_area());
}

}  // namespace detail

// Douglas-Rachford splitting for
//   min sum (|sigma| + (1/p)|sigma|^p)  s.t.  div sigma = f, sigma . n = 0:
// alternates the exact projection onto the divergence constraint with the
// radial shrinkage prox of the integrand.  The returned iterate is the
// last projection output, so it is feasible to projection accuracy no
// matter where the shrinkage stopped.
inline DualSolution solve_dual(const Grid2D& g, const PotentialSpec& spec,
                               const ScalarField& f,
                               const DualParams& params = {}) {
  check_same_grid(g, f.grid, "solve_dual");
  check_compatible_source(f, "solve_dual");
  if (spec.p > 2.0 + 1e-12)
    std::cerr << "[degenflow] warning: dual problem posed for p <= 2, got p="
              << spec.p << "\n";
  PotentialSpec pure = spec;
  pure.reg_eps = 0.0;

  NeumannPoisson poisson(g);
  double tau = params.tau;

  VectorField z(g, true);
  VectorField x = project_divergence(poisson, z, f);
  VectorField x_prev = x;

  DualSolution sol;
  int settled = 0;  // consecutive iterate-change hits
  for (int it = 1; it <= params.max_iter; ++it) {
    // reflect, shrink, update
    VectorField refl = x;
    for (size_t k = 0; k < refl.x.size(); ++k)
      refl.x[k] = 2.0 * x.x[k] - z.x[k];
    for (size_t k = 0; k < refl.y.size(); ++k)
      refl.y[k] = 2.0 * x.y[k] - z.y[k];
    const VectorField y = detail::corner_shrink(g, pure, refl, tau);
    for (size_t k = 0; k < z.x.size(); ++k) z.x[k] += y.x[k] - x.x[k];
    for (size_t k = 0; k < z.y.size(); ++k) z.y[k] += y.y[k] - x.y[k];

    x_prev = x;
    x = project_divergence(poisson, z, f);
    sol.iterations = it;

    const double scale = std::max(1.0, x.norm_l2());
    const double change = detail::field_distance(x, x_prev);
    sol.split_residual = detail::field_distance(x, y);
    if (params.adapt_tau && it % 64 == 0 && sol.split_residual > 0.0 &&
        change > 0.0) {
      if (change > 10.0 * sol.split_residual)
        tau *= 1.5;
      else if (sol.split_residual > 10.0 * change)
        tau /= 1.5;
    }
    if (!params.quiet && it % 100 == 0)
      std::cerr << "[dual] it=" << it << " change=" << change / scale
                << " split=" << sol.split_residual / scale << "\n";
    // the returned iterate is the projection output, so feasibility holds
    // to round-off; stop once its movement settles (two hits in a row
    // guard against a single spuriously small step)
    settled = (change <= params.tol * scale) ? settled + 1 : 0;
    if (settled >= 2) break;
    if (it == params.max_iter && !params.best_effort)
      throw MaxIterations("solve_dual: iteration cap reached");
  }

  sol.sigma_bar = x;
  sol.objective = dual_objective(g, pure, x);
  {
    const ScalarField div = divergence(g, x);
    double s = 0.0;
    for (int c = 0; c < g.cells(); ++c) {
      const double r = div.values[c] - f.values[c];
      s += r * r;
    }
    sol.feas_residual = std::sqrt(s * g.cell_area());
  }
  return sol;
}

// Fenchel certificate P + D: zero at joint optimality, small positive at
// the discrete optima of consistent quadratures.
inline double duality_gap(const Grid2D& g, const PotentialSpec& spec,
                          const PrimalSolution& primal,
                          const DualSolution& dual, const ScalarField& f) {
  check_same_grid(g, primal.u.grid, "duality_gap");
  check_same_grid(g, dual.sigma_bar.grid, "duality_gap");
  check_same_grid(g, f.grid, "duality_gap");
  const double p_val = primal_energy(g, spec, primal.u, f);
  const double d_val = dual_objective(g, spec, dual.sigma_bar);
  return p_val + d_val;
}

inline double relative_gap(double gap, double p_val, double d_val) {
  return gap / std::max({1.0, std::abs(p_val), std::abs(d_val)});
}

inline nlohmann::json dual_summary(const DualSolution& s) {
  return nlohmann::json{{"objective", s.objective},
                        {"feas_residual", s.feas_residual},
                        {"split_residual", s.split_residual},
                        {"iterations", s.iterations}};
}

}  // namespace degenflow
