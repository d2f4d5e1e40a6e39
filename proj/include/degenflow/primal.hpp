#pragma once

#include <random>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <json.hpp>

#include "degenflow/energy.hpp"
#include "degenflow/errors.hpp"
#include "degenflow/grid.hpp"

namespace degenflow {

struct PrimalParams {
  // decreasing regularization schedule; each stage warm-starts the next,
  // and the continuation stops once flux and energy stabilize
  std::vector<double> eps_schedule = {1e-1, 1e-2, 1e-3, 1e-4,
                                      1e-5, 1e-6, 1e-7, 1e-8};
  // kink mollification per stage: clamp(kink_factor*sqrt(eps),
  // floor_cells*h, 0.25).  Smoothed stages keep the Hessian continuous
  // across the dead-zone boundary, which damped Newton needs near the
  // free boundary; a polish phase shrinks the smoothing afterwards.
  double kink_factor = 1.0;
  double kink_floor_cells = 2.0;
  double flux_tol = 3e-4;     // relative sigma change between stages
  double energy_tol = 1e-5;   // relative energy change between stages
  double stage_tol = 1e-11;   // L2 residual of the stage condition
  double report_tol = 1e-3;   // bound on the reported residual
  int max_newton = 150;       // per stage
  int max_polish = 60;        // per polish step
  int max_linesearch = 60;
  bool random_init = false;   // randomized start (flux-uniqueness checks)
  uint64_t seed = 0;
};

struct PrimalSolution {
  ScalarField u;       // mean-zero representative
  VectorField sigma;   // Euler-Lagrange flux, reg_eps = 0 semantics
  double energy = 0.0;      // exact-potential primal energy of u
  double grad_norm = 0.0;   // L2 of div(sigma) - f
  std::vector<double> eps_schedule;  // stages actually run
  double final_kink_smoothing = 0.0;
  int iterations = 0;
  std::vector<std::vector<double>> stage_energies;  // per-stage Newton trace
};

namespace detail {

inline double foc_residual(const Grid2D& g, const VectorField& sigma,
                           const ScalarField& f) {
  const ScalarField div = divergence(g, sigma);
  double s = 0.0;
  for (int c = 0; c < g.cells(); ++c) {
    const double r = div.values[c] - f.values[c];
    s += r * r;
  }
  return std::sqrt(s * g.cell_area());
}

// One damped-Newton run on a fixed stage potential.  Returns the number
// of iterations on success, -1 when the cap is exhausted; throws
// LineSearchFailure on a non-descent direction (an assembly bug, not a
// convergence failure).
class NewtonDriver {
 public:
  NewtonDriver(const Grid2D& g, const ScalarField& f, const PrimalParams& p)
      : g_(g), f_(f), params_(p) {}

  int minimize(const PotentialSpec& stage_spec, ScalarField& u,
               int iteration_cap, std::vector<double>* trace) {
    const int n = g_.cells();
    const double tol_abs =
        params_.stage_tol * std::max(1.0, f_.norm_l2());
    for (int it = 0; it < iteration_cap; ++it) {
      const Eigen::VectorXd grad = energy_gradient(g_, stage_spec, u, f_);
      const double res = grad.norm() / std::sqrt(g_.cell_area());
      double energy = energy_interior(g_, stage_spec, u) + dot_cells(f_, u);
      if (trace && trace->empty()) trace->push_back(energy);
      if (res <= tol_abs) return it;

      Eigen::SparseMatrix<double> hess = assemble_hessian(g_, stage_spec, u);
      Eigen::SparseMatrix<double> reduced(n - 1, n - 1);
      {
        // pin cell 0 against the constant nullspace
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(hess.nonZeros());
        for (int k = 0; k < hess.outerSize(); ++k)
          for (Eigen::SparseMatrix<double>::InnerIterator itr(hess, k); itr;
               ++itr)
            if (itr.row() > 0 && itr.col() > 0)
              trip.emplace_back(itr.row() - 1, itr.col() - 1, itr.value());
        reduced.setFromTriplets(trip.begin(), trip.end());
      }
      if (!pattern_ready_) {
        ldlt_.analyzePattern(reduced);
        pattern_ready_ = true;
      }
      ldlt_.factorize(reduced);
      if (ldlt_.info() != Eigen::Success)
        throw LineSearchFailure("solve_primal: Hessian factorization failed");
      Eigen::VectorXd dir(n);
      dir[0] = 0.0;
      dir.tail(n - 1) = ldlt_.solve(Eigen::VectorXd(-grad.tail(n - 1)));
      const double slope = grad.dot(dir);
      if (!(slope < 0.0))
        throw LineSearchFailure("solve_primal: non-descent Newton direction");

      bool accepted = false;
      // below the energy round-off floor the Armijo test is blind; take
      // the plain Newton step
      if (-slope <= 1e-13 * (std::abs(energy) + 1.0)) {
        for (int c = 0; c < n; ++c) u.values[c] += dir[c];
        u.subtract_mean();
        energy = energy_interior(g_, stage_spec, u) + dot_cells(f_, u);
        accepted = true;
      }
      double step = 1.0;
      ScalarField trial(g_);
      for (int ls = 0; !accepted && ls < params_.max_linesearch; ++ls) {
        for (int c = 0; c < n; ++c)
          trial.values[c] = u.values[c] + step * dir[c];
        const double et =
            energy_interior(g_, stage_spec, trial) + dot_cells(f_, trial);
        if (et <= energy + 1e-4 * step * slope) {
          u = trial;
          u.subtract_mean();
          energy = et;
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted)
        throw LineSearchFailure("solve_primal: Armijo search failed");
      if (trace) trace->push_back(energy);
      ++total_iterations_;
    }
    return -1;
  }

  int total_iterations() const { return total_iterations_; }

 private:
  const Grid2D& g_;
  const ScalarField& f_;
  const PrimalParams& params_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
  bool pattern_ready_ = false;
  int total_iterations_ = 0;
};

}  // namespace detail

// Damped Newton on smoothed, regularized energies with continuation in
// reg_eps, stopping once the reported flux and energy stabilize, then a
// polish phase that shrinks the kink smoothing at the final reg_eps
// (reverting if an unsmoothed polish stage refuses to converge).  A stage
// that exhausts its iteration budget after at least two converged stages
// ends the continuation at the last converged state; an early-stage
// failure throws MaxIterations.
inline PrimalSolution solve_primal(const Grid2D& g, const PotentialSpec& spec,
                                   const ScalarField& f,
                                   const PrimalParams& params = {}) {
  check_same_grid(g, f.grid, "solve_primal");
  check_compatible_source(f, "solve_primal");
  if (params.eps_schedule.empty())
    throw std::invalid_argument("solve_primal: empty eps schedule");

  ScalarField u(g);
  if (params.random_init) {
    std::mt19937_64 rng(params.seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (double& v : u.values) v = dist(rng);
    u.subtract_mean();
  }

  PrimalSolution sol;
  detail::NewtonDriver driver(g, f, params);
  const double kink_floor = params.kink_floor_cells * std::max(g.hx, g.hy);

  PotentialSpec report_spec = spec;  // reg_eps = user value, usually 0
  VectorField stage_sigma(g, true);
  double stage_energy = 0.0;
  bool have_report = false;
  double eps_stop = params.eps_schedule.front();
  double smoothing_stop = 0.0;

  for (size_t stage = 0; stage < params.eps_schedule.size(); ++stage) {
    PotentialSpec stage_spec = spec;
    stage_spec.reg_eps = std::max(params.eps_schedule[stage], spec.reg_eps);
    stage_spec.kink_smoothing =
        std::clamp(params.kink_factor * std::sqrt(params.eps_schedule[stage]),
                   kink_floor, 0.25);

    sol.stage_energies.emplace_back();
    ScalarField backup = u;
    const int its = driver.minimize(stage_spec, u, params.max_newton,
                                    &sol.stage_energies.back());
    if (its < 0) {
      if (stage < 2)
        throw MaxIterations("solve_primal: stage " + std::to_string(stage) +
                            " did not reach tolerance");
      u = backup;  // keep the last converged continuation state
      sol.stage_energies.pop_back();
      break;
    }
    sol.eps_schedule.push_back(params.eps_schedule[stage]);
    eps_stop = params.eps_schedule[stage];
    smoothing_stop = stage_spec.kink_smoothing;

    report_spec.kink_smoothing = stage_spec.kink_smoothing;
    const VectorField sigma_k = el_flux(g, report_spec, u);
    const double energy_k = primal_energy(g, spec, u, f);
    if (have_report) {
      double d2 = 0.0, n2 = 0.0;
      for (size_t k = 0; k < sigma_k.x.size(); ++k) {
        const double d = sigma_k.x[k] - stage_sigma.x[k];
        d2 += d * d;
        n2 += sigma_k.x[k] * sigma_k.x[k];
      }
      for (size_t k = 0; k < sigma_k.y.size(); ++k) {
        const double d = sigma_k.y[k] - stage_sigma.y[k];
        d2 += d * d;
        n2 += sigma_k.y[k] * sigma_k.y[k];
      }
      const double flux_change = std::sqrt(d2) / std::max(1.0, std::sqrt(n2));
      const double energy_change = std::abs(energy_k - stage_energy) /
                                   std::max(1.0, std::abs(energy_k));
      stage_sigma = sigma_k;
      stage_energy = energy_k;
      if (flux_change <= params.flux_tol && energy_change <= params.energy_tol)
        break;
    } else {
      stage_sigma = sigma_k;
      stage_energy = energy_k;
      have_report = true;
    }
  }

  // polish: shrink the kink smoothing at the final reg_eps
  double smoothing_final = smoothing_stop;
  for (double s : {0.25 * kink_floor, 0.0625 * kink_floor, 0.0}) {
    if (s >= smoothing_final) continue;
    PotentialSpec polish_spec = spec;
    polish_spec.reg_eps = std::max(eps_stop, spec.reg_eps);
    polish_spec.kink_smoothing = s;
    ScalarField backup = u;
    sol.stage_energies.emplace_back();
    const int its = driver.minimize(polish_spec, u, params.max_polish,
                                    &sol.stage_energies.back());
    if (its < 0) {
      u = backup;
      sol.stage_energies.pop_back();
      break;
    }
    smoothing_final = s;
  }

  report_spec.kink_smoothing = smoothing_final;
  sol.u = u;
  sol.sigma = el_flux(g, report_spec, u);
  sol.grad_norm = detail::foc_residual(g, sol.sigma, f);
  sol.energy = primal_energy(g, spec, u, f);
  sol.final_kink_smoothing = smoothing_final;
  sol.iterations = driver.total_iterations();
  if (sol.grad_norm > params.report_tol * std::max(1.0, f.norm_l2()))
    throw MaxIterations(
        "solve_primal: reported residual above tolerance; extend the eps "
        "schedule");
  return sol;
}

inline nlohmann::json primal_summary(const PrimalSolution& s) {
  return nlohmann::json{{"energy", s.energy},
                        {"grad_norm", s.grad_norm},
                        {"iterations", s.iterations},
                        {"eps_schedule", s.eps_schedule},
                        {"final_kink_smoothing", s.final_kink_smoothing}};
}

}  // namespace degenflow
