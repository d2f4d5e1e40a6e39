#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "degenflow/errors.hpp"
#include "degenflow/fast_marching.hpp"
#include "degenflow/grid.hpp"

namespace degenflow {

inline std::pair<ScalarField, ScalarField> split_source(const ScalarField& f) {
  check_compatible_source(f, "split_source");
  ScalarField plus(f.grid), minus(f.grid);
  for (size_t k = 0; k < f.values.size(); ++k) {
    plus.values[k] = std::max(f.values[k], 0.0);
    minus.values[k] = std::max(-f.values[k], 0.0);
  }
  return {std::move(plus), std::move(minus)};
}

namespace detail {

// bilinear interpolation on the cell-center lattice with constant
// extrapolation past the outermost centers
inline double sample_cells(const ScalarField& f, double x, double y) {
  const Grid2D& g = f.grid;
  const double u = std::clamp(x / g.hx - 0.5, 0.0, g.nx - 1.0);
  const double v = std::clamp(y / g.hy - 0.5, 0.0, g.ny - 1.0);
  const int i0 = std::min(static_cast<int>(u), g.nx - 2);
  const int j0 = std::min(static_cast<int>(v), g.ny - 2);
  const double a = u - i0, b = v - j0;
  return (1 - a) * (1 - b) * f(i0, j0) + a * (1 - b) * f(i0 + 1, j0) +
         (1 - a) * b * f(i0, j0 + 1) + a * b * f(i0 + 1, j0 + 1);
}

// bilinear interpolation of MAC components on their own face lattices
inline double sample_fx(const VectorField& s, double x, double y) {
  const Grid2D& g = s.grid;
  const double u = std::clamp(x / g.hx, 0.0, static_cast<double>(g.nx));
  const double v = std::clamp(y / g.hy - 0.5, 0.0, g.ny - 1.0);
  const int i0 = std::min(static_cast<int>(u), g.nx - 1);
  const int j0 = std::min(static_cast<int>(v), g.ny - 2);
  const double a = u - i0, b = v - j0;
  return (1 - a) * (1 - b) * s.fx(i0, j0) + a * (1 - b) * s.fx(i0 + 1, j0) +
         (1 - a) * b * s.fx(i0, j0 + 1) + a * b * s.fx(i0 + 1, j0 + 1);
}

inline double sample_fy(const VectorField& s, double x, double y) {
  const Grid2D& g = s.grid;
  const double u = std::clamp(x / g.hx - 0.5, 0.0, g.nx - 1.0);
  const double v = std::clamp(y / g.hy, 0.0, static_cast<double>(g.ny));
  const int i0 = std::min(static_cast<int>(u), g.nx - 2);
  const int j0 = std::min(static_cast<int>(v), g.ny - 1);
  const double a = u - i0, b = v - j0;
  return (1 - a) * (1 - b) * s.fy(i0, j0) + a * (1 - b) * s.fy(i0 + 1, j0) +
         (1 - a) * b * s.fy(i0, j0 + 1) + a * b * s.fy(i0 + 1, j0 + 1);
}

}  // namespace detail

// The transport field sigma_hat(t,x) = sigma_bar(x) / ((1-t)f+ + t f-),
// with the denominator floored at kappa.  Where the denominator sits
// below `unreliable_den` almost no mass flows and the field direction is
// untrustworthy (the flux there is residual); such evaluations are
// flagged so the tracer can treat them specially.
class SigmaHatField {
 public:
  SigmaHatField(const VectorField& sigma_bar, const ScalarField& fplus,
                const ScalarField& fminus, double kappa,
                double unreliable_den = 0.0)
      : sigma_(sigma_bar),
        fplus_(fplus),
        fminus_(fminus),
        kappa_(kappa),
        unreliable_(std::max(unreliable_den, kappa)) {
    check_same_grid(sigma_.grid, fplus.grid, "SigmaHatField");
    check_same_grid(sigma_.grid, fminus.grid, "SigmaHatField");
    if (!(kappa > 0.0)) throw std::invalid_argument("SigmaHatField: kappa > 0");
  }

  Vec2 eval(double t, const Vec2& x, bool* unreliable = nullptr) const {
    const Grid2D& g = sigma_.grid;
    if (x.x() < 0.0 || x.x() > g.lx || x.y() < 0.0 || x.y() > g.ly)
      throw OutOfDomain("sigma_hat: point outside the domain");
    const double den_raw =
        (1.0 - t) * detail::sample_cells(fplus_, x.x(), x.y()) +
        t * detail::sample_cells(fminus_, x.x(), x.y());
    const double den = std::max(den_raw, kappa_);
    if (unreliable && den_raw < unreliable_) *unreliable = true;
    return Vec2(detail::sample_fx(sigma_, x.x(), x.y()),
                detail::sample_fy(sigma_, x.x(), x.y())) /
           den;
  }

  const Grid2D& grid() const { return sigma_.grid; }

 private:
  const VectorField& sigma_;
  const ScalarField& fplus_;
  const ScalarField& fminus_;
  double kappa_;
  double unreliable_;
};

inline Vec2 sigma_hat(const VectorField& sigma_bar, const ScalarField& fplus,
                      const ScalarField& fminus, double t, const Vec2& x,
                      double kappa) {
  return SigmaHatField(sigma_bar, fplus, fminus, kappa).eval(t, x);
}

struct CurveRecord {
  int id = 0;
  int start_cell = 0;
  double weight = 0.0;
  std::vector<double> t;        // parameter values of the vertices
  std::vector<Vec2> vertices;   // decimated polyline over t in [0,1]
  bool exited_domain = false;
  bool clamped_denominator = false;
  bool completed = true;        // reached t = 1 inside the domain
};

struct WardropEntry {
  int curve_id = 0;
  double weight = 0.0;
  double path_cost = 0.0;
  double geodesic = 0.0;
  double ratio = 0.0;
  bool flagged = false;  // ratio > 1 + slack
};

struct TrafficPlan {
  std::vector<CurveRecord> curves;
  ScalarField intensity;
  double terminal_error = 0.0;   // L1 mismatch vs f- * cellArea (mass units)
  double total_weight = 0.0;
  std::vector<WardropEntry> wardrop;
};

struct TrafficParams {
  double dt = 1.0 / 256.0;       // base RK4 step in t
  double kappa_factor = 1e-6;    // denominator floor = factor * max f+
  double seed_threshold = 0.0;   // absolute f+ threshold for seeding
  double feasibility_tol = 1e-5; // relative div(sigma) - f tolerance
  int max_substep_rounds = 3;    // need-based refinement rounds per step
  int max_substeps = 4096;       // per base step
  double vertex_spacing_cells = 0.75;  // polyline decimation
  int audit_sample = 64;
  double audit_slack = 0.05;
  uint64_t seed = 0;
};

namespace detail {

// One RK4 step of dx/dt = sigma_hat(t, x); clips evaluation points at the
// boundary.  Speeds beyond what the substep budget can resolve only occur
// in kappa-floored no-mass corridors where the field direction is all
// that matters; those evaluations are capped at the resolvable speed and
// the curve is flagged.  Every genuinely mass-carrying phase stays below
// the cap and keeps its exact dynamics through substepping.
inline Vec2 rk4_step(const SigmaHatField& field, double t, double dt,
                     const Vec2& x, double speed_cap, bool* flagged) {
  auto safe_eval = [&](double tt, Vec2 p) {
    const Grid2D& g = field.grid();
    p.x() = std::clamp(p.x(), 0.0, g.lx);
    p.y() = std::clamp(p.y(), 0.0, g.ly);
    bool floored = false;
    Vec2 v = field.eval(tt, p, &floored);
    const double speed = v.norm();
    if (speed > speed_cap) {
      v *= speed_cap / speed;
      floored = true;
    }
    if (floored && flagged) *flagged = true;
    return v;
  };
  const Vec2 k1 = safe_eval(t, x);
  const Vec2 k2 = safe_eval(t + 0.5 * dt, x + 0.5 * dt * k1);
  const Vec2 k3 = safe_eval(t + 0.5 * dt, x + 0.5 * dt * k2);
  const Vec2 k4 = safe_eval(t + dt, x + dt * k3);
  return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace detail

// Integral curves of sigma_hat from the f+ cells, one per seeded cell,
// weight f+ * cellArea.  Fixed base step RK4 with a one-cell-per-step
// guard: a violating step is redone with as many substeps as the guard
// asks for, up to max_substep_rounds refinement rounds, after which
// StepTooLarge is thrown.
inline TrafficPlan trace_curves(const Grid2D& g, const VectorField& sigma_bar,
                                const ScalarField& fplus,
                                const ScalarField& fminus,
                                const TrafficParams& params = {}) {
  check_same_grid(g, sigma_bar.grid, "trace_curves");
  check_same_grid(g, fplus.grid, "trace_curves");
  check_same_grid(g, fminus.grid, "trace_curves");

  // feasibility of the flux: div sigma = f+ - f-
  {
    const ScalarField div = divergence(g, sigma_bar);
    double r2 = 0.0, n2 = 0.0;
    for (int c = 0; c < g.cells(); ++c) {
      const double fc = fplus.values[c] - fminus.values[c];
      const double r = div.values[c] - fc;
      r2 += r * r;
      n2 += fc * fc;
    }
    if (std::sqrt(r2) > params.feasibility_tol * std::max(1.0, std::sqrt(n2)))
      throw InfeasibleFlux("trace_curves: divergence(sigma) does not match f");
  }

  double max_fplus = 0.0;
  for (double v : fplus.values) max_fplus = std::max(max_fplus, v);
  const double kappa = std::max(params.kappa_factor * max_fplus, 1e-300);
  const SigmaHatField field(sigma_bar, fplus, fminus, kappa);

  TrafficPlan plan;
  plan.intensity = ScalarField(g);
  if (max_fplus == 0.0) return plan;  // nothing to transport

  const double cell_max = std::min(g.hx, g.hy);
  const double record_spacing = params.vertex_spacing_cells * cell_max;
  // Speeds above this only arise in kappa-floored no-mass corridors; the
  // cap makes them traverse "instantly" (within one base step) yet stay
  // resolvable by the default substep budget.  Deliberately independent
  // of params.max_substeps: a starved budget should fail the guard loudly
  // rather than silently slow the dynamics down.
  const double speed_cap = 0.9 * 4096.0 * cell_max / params.dt;

  for (int c = 0; c < g.cells(); ++c) {
    if (!(fplus.values[c] > params.seed_threshold) || fplus.values[c] <= 0.0)
      continue;
    CurveRecord curve;
    curve.id = static_cast<int>(plan.curves.size());
    curve.start_cell = c;
    curve.weight = fplus.values[c] * g.cell_area();
    plan.total_weight += curve.weight;

    Vec2 x = g.cell_center(c);
    curve.t.push_back(0.0);
    curve.vertices.push_back(x);
    const int n_steps = static_cast<int>(std::round(1.0 / params.dt));
    bool stopped = false;
    std::vector<std::pair<double, Vec2>> pending;
    for (int step = 0; step < n_steps && !stopped; ++step) {
      const double t0 = step * params.dt;
      // attempt the base step, refining into substeps whenever any
      // displacement exceeds one cell
      int n_sub = 1;
      bool clamped = false;
      for (int round = 0;; ++round) {
        pending.clear();
        clamped = false;
        Vec2 xs = x;
        double worst = 0.0;
        const double sdt = params.dt / n_sub;
        for (int ss = 0; ss < n_sub; ++ss) {
          const Vec2 xn = detail::rk4_step(field, t0 + ss * sdt, sdt, xs,
                                           speed_cap, &clamped);
          worst = std::max(worst, (xn - xs).norm());
          xs = xn;
          pending.emplace_back(t0 + (ss + 1) * sdt, xs);
        }
        if (worst <= cell_max) break;
        if (round >= params.max_substep_rounds ||
            n_sub >= params.max_substeps)
          throw StepTooLarge("trace_curves: step exceeds one cell after " +
                             std::to_string(round) + " refinements");
        const long proposed =
            2L * n_sub * static_cast<long>(std::ceil(worst / cell_max));
        // the last permitted round goes straight to the full budget:
        // refinement can keep uncovering faster zones, and with the speed
        // cap the full budget always resolves them
        n_sub = (round + 1 >= params.max_substep_rounds ||
                 proposed >= params.max_substeps)
                    ? params.max_substeps
                    : static_cast<int>(proposed);
      }
      curve.clamped_denominator |= clamped;
      for (auto& [tt, p] : pending) {
        if (p.x() <= 0.0 || p.x() >= g.lx || p.y() <= 0.0 || p.y() >= g.ly) {
          // clip to the boundary, flag and stop
          p.x() = std::clamp(p.x(), 0.0, g.lx);
          p.y() = std::clamp(p.y(), 0.0, g.ly);
          curve.exited_domain = true;
          curve.completed = false;
          stopped = true;
        }
        x = p;
        const bool last_vertex =
            stopped || (step + 1 == n_steps && tt == pending.back().first);
        if ((x - curve.vertices.back()).norm() >= record_spacing ||
            last_vertex) {
          curve.t.push_back(std::min(tt, 1.0));
          curve.vertices.push_back(x);
        }
        if (stopped) break;
      }
    }
    plan.curves.push_back(std::move(curve));
  }

  // terminal deposition error: endpoint histogram vs f- * cellArea
  ScalarField hist(g);
  for (const auto& curve : plan.curves)
    if (curve.completed) {
      const Vec2& e = curve.vertices.back();
      const int i = std::clamp(static_cast<int>(e.x() / g.hx), 0, g.nx - 1);
      const int j = std::clamp(static_cast<int>(e.y() / g.hy), 0, g.ny - 1);
      hist(i, j) += curve.weight;
    }
  double l1 = 0.0;
  for (int c = 0; c < g.cells(); ++c)
    l1 += std::abs(hist.values[c] - fminus.values[c] * g.cell_area());
  plan.terminal_error = l1;
  return plan;
}

// Deposits weight * (segment length inside cell) / cellArea along every
// curve; depends only on the geometric trace of the polylines.
inline ScalarField deposit_intensity(const TrafficPlan& plan,
                                     const Grid2D& g) {
  if (plan.curves.empty())
    throw EmptyPlan("deposit_intensity: plan has no curves");
  ScalarField intensity(g);
  const double inv_area = 1.0 / g.cell_area();
  for (const auto& curve : plan.curves) {
    for (size_t v = 1; v < curve.vertices.size(); ++v) {
      Vec2 a = curve.vertices[v - 1], b = curve.vertices[v];
      const double len = (b - a).norm();
      if (len == 0.0) continue;
      // split the segment at grid lines
      std::vector<double> cuts = {0.0, 1.0};
      const auto add_cuts = [&](double pa, double pb, double h) {
        const int lo = static_cast<int>(std::ceil(std::min(pa, pb) / h));
        const int hi = static_cast<int>(std::floor(std::max(pa, pb) / h));
        for (int k = lo; k <= hi; ++k) {
          const double s = (k * h - pa) / (pb - pa);
          if (s > 0.0 && s < 1.0) cuts.push_back(s);
        }
      };
      if (b.x() != a.x()) add_cuts(a.x(), b.x(), g.hx);
      if (b.y() != a.y()) add_cuts(a.y(), b.y(), g.hy);
      std::sort(cuts.begin(), cuts.end());
      for (size_t k = 1; k < cuts.size(); ++k) {
        const double s0 = cuts[k - 1], s1 = cuts[k];
        if (s1 <= s0) continue;
        const Vec2 mid = a + 0.5 * (s0 + s1) * (b - a);
        const int i =
            std::clamp(static_cast<int>(mid.x() / g.hx), 0, g.nx - 1);
        const int j =
            std::clamp(static_cast<int>(mid.y() / g.hy), 0, g.ny - 1);
        intensity(i, j) += curve.weight * len * (s1 - s0) * inv_area;
      }
    }
  }
  return intensity;
}

// Wardrop audit: every sufficiently used path should be a geodesic of the
// congestion metric gfun(i_Q).  Path costs are measured along the stored
// polylines; geodesic distances come from fast marching between each
// sampled curve's endpoints.
inline std::vector<WardropEntry> wardrop_audit(
    const TrafficPlan& plan, const ScalarField& intensity,
    const std::function<double(double)>& gfun, const TrafficParams& params) {
  if (plan.curves.empty()) throw EmptyPlan("wardrop_audit: plan is empty");
  const Grid2D& g = intensity.grid;
  ScalarField metric(g);
  for (int c = 0; c < g.cells(); ++c)
    metric.values[c] = gfun(intensity.values[c]);
  for (double m : metric.values)
    if (!(m > 0.0))
      throw NonpositiveMetric("wardrop_audit: congestion metric must be > 0");

  // mass-weighted sample without replacement
  std::vector<int> candidates;
  for (const auto& c : plan.curves)
    if (c.completed && c.vertices.size() >= 2)
      candidates.push_back(c.id);
  std::mt19937_64 rng(params.seed);
  std::vector<int> sample;
  if (static_cast<int>(candidates.size()) <= params.audit_sample) {
    sample = candidates;
  } else {
    std::vector<double> w;
    for (int id : candidates) w.push_back(plan.curves[id].weight);
    for (int k = 0; k < params.audit_sample; ++k) {
      std::discrete_distribution<int> dist(w.begin(), w.end());
      const int pick = dist(rng);
      sample.push_back(candidates[pick]);
      w[pick] = 0.0;
    }
  }

  std::vector<WardropEntry> audit;
  for (int id : sample) {
    const auto& curve = plan.curves[id];
    WardropEntry entry;
    entry.curve_id = id;
    entry.weight = curve.weight;
    for (size_t v = 1; v < curve.vertices.size(); ++v) {
      const Vec2 a = curve.vertices[v - 1], b = curve.vertices[v];
      const Vec2 mid = 0.5 * (a + b);
      entry.path_cost +=
          (b - a).norm() * detail::sample_cells(metric, mid.x(), mid.y());
    }
    const Vec2 e = curve.vertices.back();
    const int end_cell =
        g.cell(std::clamp(static_cast<int>(e.x() / g.hx), 0, g.nx - 1),
               std::clamp(static_cast<int>(e.y() / g.hy), 0, g.ny - 1));
    if (end_cell == curve.start_cell) {
      entry.geodesic = entry.path_cost;
      entry.ratio = 1.0;
    } else {
      const ScalarField dist =
          geodesic_distance(g, metric, {end_cell}, curve.start_cell);
      entry.geodesic = dist.values[curve.start_cell];
      entry.ratio = entry.geodesic > 0.0 ? entry.path_cost / entry.geodesic
                                         : 1.0;
    }
    entry.flagged = entry.ratio > 1.0 + params.audit_slack;
    audit.push_back(entry);
  }
  return audit;
}

inline double wardrop_pass_fraction(const std::vector<WardropEntry>& audit) {
  double total = 0.0, passing = 0.0;
  for (const auto& e : audit) {
    total += e.weight;
    if (!e.flagged) passing += e.weight;
  }
  return total > 0.0 ? passing / total : 1.0;
}

inline std::string curves_csv(const TrafficPlan& plan) {
  std::string csv = "curve_id,t,x,y,weight\n";
  char buf[160];
  for (const auto& c : plan.curves)
    for (size_t v = 0; v < c.vertices.size(); ++v) {
      std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g\n", c.id,
                    c.t[v], c.vertices[v].x(), c.vertices[v].y(), c.weight);
      csv += buf;
    }
  return csv;
}

inline nlohmann::json wardrop_json(const std::vector<WardropEntry>& audit,
                                   double slack) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : audit)
    entries.push_back({{"curve_id", e.curve_id},
                       {"weight", e.weight},
                       {"path_cost", e.path_cost},
                       {"geodesic", e.geodesic},
                       {"ratio", e.ratio},
                       {"flagged", e.flagged}});
  return nlohmann::json{{"slack", slack},
                        {"pass_fraction", wardrop_pass_fraction(audit)},
                        {"entries", entries}};
}

}  // namespace degenflow
