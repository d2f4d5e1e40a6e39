#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "degenflow/errors.hpp"
#include "degenflow/grid.hpp"

namespace degenflow {

// Exact solver for the staggered Neumann Poisson problem
//   div(grad phi) = r,   grad phi . n = 0 on the boundary,
// using the DCT-II diagonalization of the zero-flux Laplacian.  The
// cosine modes cos(pi k (i+1/2)/n) are exact eigenvectors of the MAC
// div-grad operator including its boundary rows, so the solve is exact
// to round-off; the constant mode is projected out, which fixes the
// mean-zero gauge.  Reused across iterations by the dual solver.
class NeumannPoisson {
 public:
  explicit NeumannPoisson(const Grid2D& g) : grid_(g) {
    cx_ = dct_matrix(g.nx);
    cy_ = dct_matrix(g.ny);
    lambda_x_.resize(g.nx);
    lambda_y_.resize(g.ny);
    for (int k = 0; k < g.nx; ++k) {
      const double s = std::sin(0.5 * M_PI * k / g.nx);
      lambda_x_[k] = -4.0 / (g.hx * g.hx) * s * s;
    }
    for (int k = 0; k < g.ny; ++k) {
      const double s = std::sin(0.5 * M_PI * k / g.ny);
      lambda_y_[k] = -4.0 / (g.hy * g.hy) * s * s;
    }
  }

  const Grid2D& grid() const { return grid_; }

  // mean-zero phi with div(grad phi) = rhs - mean(rhs)
  ScalarField solve(const ScalarField& rhs) const {
    check_same_grid(grid_, rhs.grid, "NeumannPoisson::solve");
    const int nx = grid_.nx, ny = grid_.ny;
    Eigen::MatrixXd r(ny, nx);
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) r(j, i) = rhs(i, j);
    Eigen::MatrixXd u = cy_ * r * cx_.transpose();
    for (int k = 0; k < ny; ++k)
      for (int l = 0; l < nx; ++l) {
        const double lam = lambda_x_[l] + lambda_y_[k];
        u(k, l) = (lam == 0.0) ? 0.0 : u(k, l) / lam;
      }
    Eigen::MatrixXd phi = cy_.transpose() * u * cx_;
    ScalarField out(grid_);
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) out(i, j) = phi(j, i);
    return out;
  }

 private:
  static Eigen::MatrixXd dct_matrix(int n) {
    Eigen::MatrixXd c(n, n);
    for (int k = 0; k < n; ++k) {
      const double s = (k == 0) ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
      for (int i = 0; i < n; ++i)
        c(k, i) = s * std::cos(M_PI * k * (i + 0.5) / n);
    }
    return c;
  }

  Grid2D grid_;
  Eigen::MatrixXd cx_, cy_;
  std::vector<double> lambda_x_, lambda_y_;
};

inline void check_compatible_source(const ScalarField& f, const char* where) {
  const double total = f.sum_weighted();
  if (std::abs(total) > 1e-10 * std::max(1.0, f.norm_l1()))
    throw IncompatibleSource(std::string(where) +
                             ": source does not integrate to zero");
}

// Minimal-L2 divergence repair: s + grad(phi) with
// div(grad phi) = f - div(s).  Output divergence matches f to 1e-10.
inline VectorField project_divergence(const NeumannPoisson& solver,
                                      const VectorField& s,
                                      const ScalarField& f) {
  const Grid2D& g = solver.grid();
  check_same_grid(g, s.grid, "project_divergence");
  check_compatible_source(f, "project_divergence");
  ScalarField r = divergence(g, s);
  for (size_t k = 0; k < r.values.size(); ++k)
    r.values[k] = f.values[k] - r.values[k];
  const double rm = r.mean();
  for (double& v : r.values) v -= rm;
  const ScalarField phi = solver.solve(r);
  const VectorField gphi = gradient(g, phi, /*neumann=*/true);
  VectorField out = s;
  for (size_t k = 0; k < out.x.size(); ++k) out.x[k] += gphi.x[k];
  for (size_t k = 0; k < out.y.size(); ++k) out.y[k] += gphi.y[k];
  return out;
}

inline VectorField project_divergence(const Grid2D& g, const VectorField& s,
                                      const ScalarField& f) {
  NeumannPoisson solver(g);
  VectorField out = project_divergence(solver, s, f);
  // verify the contract before handing the field back
  ScalarField d = divergence(g, out);
  double worst = 0.0;
  for (size_t k = 0; k < d.values.size(); ++k)
    worst = std::max(worst, std::abs(d.values[k] - f.values[k]));
  if (worst > 1e-10 * std::max(1.0, f.max_abs() + s.max_abs()))
    throw SolverStagnation("project_divergence: residual above tolerance");
  return out;
}

}  // namespace degenflow
