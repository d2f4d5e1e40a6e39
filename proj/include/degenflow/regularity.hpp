#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "degenflow/errors.hpp"
#include "degenflow/grid.hpp"
#include "degenflow/potential.hpp"

namespace degenflow {

// Diagnostics configuration for the oscillation/energy measurements.
// eps0 and energy_const are tunables: the theory guarantees their
// existence but gives no computable formula, so they are configuration,
// not derived quantities.
struct DiagnosticsConfig {
  double eps0 = 0.3;          // annulus ratio between consecutive scales
  double decay_factor = 7.0 / 8.0;
  double eps_f = 1.0;         // declared integrability surplus of f
  double energy_const = 0.01; // threshold c in E >= c * osc^2
  std::vector<double> delta_list = {0.4, 0.2, 0.1, 0.05};
  int direction_count = 16;
  int boundary_margin_cells = 4;

  double beta() const { return eps_f / (2.0 + eps_f); }

  void validate() const {
    if (!(eps0 > 0.0 && eps0 < 1.0))
      throw ConfigInvalid("diagnostics: eps0 must lie in (0,1)");
    if (!(beta() > 0.0 && beta() < 1.0))
      throw ConfigInvalid("diagnostics: beta must lie in (0,1)");
    if (direction_count < 8)
      throw ConfigInvalid("diagnostics: need at least 8 directions");
    for (size_t k = 1; k < delta_list.size(); ++k)
      if (!(delta_list[k] < delta_list[k - 1]) || !(delta_list[k] > 0.0))
        throw ConfigInvalid("diagnostics: delta_list must decrease to > 0");
  }
};

inline void to_json(nlohmann::json& j, const DiagnosticsConfig& c) {
  j = nlohmann::json{{"eps0", c.eps0},
                     {"decay_factor", c.decay_factor},
                     {"eps_f", c.eps_f},
                     {"energy_const", c.energy_const},
                     {"delta_list", c.delta_list},
                     {"direction_count", c.direction_count},
                     {"boundary_margin_cells", c.boundary_margin_cells}};
}

inline void from_json(const nlohmann::json& j, DiagnosticsConfig& c) {
  c.eps0 = j.value("eps0", 0.3);
  c.decay_factor = j.value("decay_factor", 7.0 / 8.0);
  c.eps_f = j.value("eps_f", 1.0);
  c.energy_const = j.value("energy_const", 0.01);
  if (j.contains("delta_list"))
    c.delta_list = j["delta_list"].get<std::vector<double>>();
  c.direction_count = j.value("direction_count", 16);
  c.boundary_margin_cells = j.value("boundary_margin_cells", 4);
  c.validate();
}

// cell-centered gradient by face averaging (boundary faces are zero)
inline Vec2 cell_gradient(const Grid2D& g, const VectorField& gradu, int i,
                          int j) {
  return {0.5 * (gradu.fx(i, j) + gradu.fx(i + 1, j)),
          0.5 * (gradu.fy(i, j) + gradu.fy(i, j + 1))};
}

// (grad u . e - (1 + delta))_+ at cell centers
inline ScalarField compute_truncation(const Grid2D& g,
                                      const VectorField& gradu, const Vec2& e,
                                      double delta) {
  check_same_grid(g, gradu.grid, "compute_truncation");
  if (delta < 0.0)
    throw std::invalid_argument("compute_truncation: delta >= 0");
  ScalarField out(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      out(i, j) =
          std::max(cell_gradient(g, gradu, i, j).dot(e) - (1.0 + delta), 0.0);
  return out;
}

// (|grad u| - (1 + delta))_+  =  sup over directions of the truncations
inline ScalarField compute_excess_modulus(const Grid2D& g,
                                          const VectorField& gradu,
                                          double delta) {
  check_same_grid(g, gradu.grid, "compute_excess_modulus");
  if (delta < 0.0)
    throw std::invalid_argument("compute_excess_modulus: delta >= 0");
  ScalarField out(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      out(i, j) = std::max(
          cell_gradient(g, gradu, i, j).norm() - (1.0 + delta), 0.0);
  return out;
}

inline double oscillation(const ScalarField& field, const CellSet& region) {
  if (region.empty()) throw EmptyRegion("oscillation: empty region");
  double lo = field.values[region[0]], hi = lo;
  for (int c : region) {
    lo = std::min(lo, field.values[c]);
    hi = std::max(hi, field.values[c]);
  }
  return hi - lo;
}

// sum over faces interior to the region of (difference/spacing)^2 * area
inline double dirichlet_energy(const Grid2D& g, const ScalarField& field,
                               const CellSet& region) {
  check_same_grid(g, field.grid, "dirichlet_energy");
  if (region.empty()) throw EmptyRegion("dirichlet_energy: empty region");
  std::vector<char> in(static_cast<size_t>(g.cells()), 0);
  for (int c : region) in[c] = 1;
  double e = 0.0;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 1; i < g.nx; ++i)
      if (in[g.cell(i - 1, j)] && in[g.cell(i, j)]) {
        const double d = (field(i, j) - field(i - 1, j)) / g.hx;
        e += d * d;
      }
  for (int j = 1; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      if (in[g.cell(i, j - 1)] && in[g.cell(i, j)]) {
        const double d = (field(i, j) - field(i, j - 1)) / g.hy;
        e += d * d;
      }
  return e * g.cell_area();
}

// one transition between consecutive scales
struct ScaleRecord {
  int level = 0;
  double radius = 0.0;       // R_n
  double osc = 0.0;          // M_n over B(R_n)
  double annulus_energy = 0.0;  // Dirichlet energy on B(R_n) \ B(R_{n+1})
  bool decay = false;        // M_{n+1} <= decay_factor * M_n
  bool energy = false;       // E_n >= energy_const * M_n^2
  bool small = false;        // M_n <= R_n^beta
  bool none = false;         // no alternative held (reported, not an error)
};

struct ScaleClassification {
  std::vector<ScaleRecord> records;
  double final_osc = 0.0;  // M_N at the innermost resolvable scale
  int count_decay = 0;     // j
  int count_energy = 0;    // h
  int count_small = 0;     // k
};

// Measures the three-alternatives structure on a dyadic-type ladder of
// balls R_n = R0 * eps0^n down to the 4-cell resolution floor.
inline ScaleClassification classify_scales(const Grid2D& g,
                                           const ScalarField& field,
                                           const Vec2& center, double r0,
                                           const DiagnosticsConfig& cfg) {
  cfg.validate();
  const double margin =
      std::min({center.x(), g.lx - center.x(), center.y(), g.ly - center.y()});
  if (r0 > margin)
    throw RegionOutOfDomain("classify_scales: outer ball leaves the domain");
  const double floor_r = 4.0 * std::max(g.hx, g.hy);
  std::vector<double> radii;
  for (double r = r0; r >= floor_r; r *= cfg.eps0) radii.push_back(r);
  if (radii.size() < 3)
    throw RegionOutOfDomain(
        "classify_scales: fewer than 3 scales resolvable at this grid");

  std::vector<double> osc_n(radii.size());
  for (size_t n = 0; n < radii.size(); ++n)
    osc_n[n] = oscillation(field, ball_region(g, center, radii[n]));

  ScaleClassification out;
  out.final_osc = osc_n.back();
  const double beta = cfg.beta();
  for (size_t n = 0; n + 1 < radii.size(); ++n) {
    ScaleRecord rec;
    rec.level = static_cast<int>(n);
    rec.radius = radii[n];
    rec.osc = osc_n[n];
    rec.annulus_energy = dirichlet_energy(
        g, field, annulus_region(g, center, radii[n + 1], radii[n]));
    rec.decay = osc_n[n + 1] <= cfg.decay_factor * osc_n[n] + 1e-15;
    rec.energy = rec.annulus_energy >= cfg.energy_const * osc_n[n] * osc_n[n];
    rec.small = osc_n[n] <= std::pow(radii[n], beta);
    rec.none = !(rec.decay || rec.energy || rec.small);
    out.count_decay += rec.decay;
    out.count_energy += rec.energy;
    out.count_small += rec.small;
    out.records.push_back(rec);
  }
  return out;
}

// least squares of M against |ln R|^{-1/2} through the origin
inline std::pair<double, double> fit_log_modulus(
    const std::vector<std::pair<double, double>>& pairs) {
  if (pairs.size() < 3)
    throw std::invalid_argument("fit_log_modulus: need at least 3 pairs");
  for (const auto& [r, m] : pairs)
    if (!(r > 0.0 && r < 1.0))
      throw std::invalid_argument("fit_log_modulus: radii must lie in (0,1)");
  bool all_equal = true;
  for (const auto& [r, m] : pairs) all_equal &= (r == pairs.front().first);
  if (all_equal) throw DegenerateFit("fit_log_modulus: all radii equal");

  double sxx = 0.0, sxm = 0.0, smm = 0.0;
  for (const auto& [r, m] : pairs) {
    const double x = 1.0 / std::sqrt(-std::log(r));
    sxx += x * x;
    sxm += x * m;
    smm += m * m;
  }
  const double c = std::max(sxm / sxx, 0.0);
  if (smm == 0.0) return {0.0, 0.0};
  double res2 = 0.0;
  for (const auto& [r, m] : pairs) {
    const double x = 1.0 / std::sqrt(-std::log(r));
    res2 += (m - c * x) * (m - c * x);
  }
  return {c, std::sqrt(res2 / smm)};
}

// Executable form of the iteration lemma: Y_{n+1} = c b^n Y_n^{1+beta}.
// The returned sequence is 0-based with seq[0] = Y1, so seq[k] carries
// the (k+1)-th member of the paper's 1-based chain and the k-th step
// uses the factor b^k.  The closed-form threshold for seq[0],
//   Y* = c^{-1/beta} b^{-(beta+1)/beta^2},
// makes W = c^{1/beta} b^{n/beta + 1/beta^2} Y_n invariant, so threshold
// starts decay exactly like b^{-n/beta}.
struct RecursionResult {
  std::vector<double> sequence;
  bool converged = false;
};

inline double degiorgi_threshold(double c, double b, double beta) {
  return std::pow(c, -1.0 / beta) *
         std::pow(b, -(beta + 1.0) / (beta * beta));
}

inline RecursionResult degiorgi_recursion(double c, double b, double beta,
                                          double y1, int n_max) {
  if (!(c > 0.0 && b > 0.0 && beta > 0.0))
    throw std::invalid_argument("degiorgi_recursion: c, b, beta > 0");
  if (y1 < 0.0) throw std::invalid_argument("degiorgi_recursion: Y1 >= 0");
  if (n_max < 2) throw std::invalid_argument("degiorgi_recursion: n_max >= 2");
  RecursionResult out;
  out.sequence.resize(static_cast<size_t>(n_max) + 1);
  out.sequence[0] = y1;
  for (int k = 0; k < n_max; ++k) {
    const double y = out.sequence[k];
    out.sequence[k + 1] =
        std::isfinite(y) ? c * std::pow(b, k + 1) * std::pow(y, 1.0 + beta)
                         : y;
  }
  const double last = out.sequence.back();
  out.converged = (last == 0.0) || (last <= 1e-6 * y1);
  return out;
}

// measured modulus of continuity over a ladder of radii
struct ModulusTable {
  std::vector<double> radii;
  std::vector<std::string> names;
  std::vector<std::vector<double>> omega;  // omega[column][radius index]
};

namespace detail {

inline std::vector<double> default_modulus_radii(const Grid2D& g) {
  std::vector<double> radii;
  const double h = std::max(g.hx, g.hy);
  for (double r = h; r <= 0.25 * std::min(g.lx, g.ly); r *= 2.0)
    radii.push_back(r);
  return radii;
}

// max over cell pairs at Euclidean distance <= r of |v(x) - v(y)|,
// restricted to cells at least `margin` cells away from the boundary
inline std::vector<double> pairwise_moduli(const Grid2D& g,
                                           const ScalarField& v,
                                           const std::vector<double>& radii,
                                           int margin) {
  std::vector<double> out(radii.size(), 0.0);
  for (size_t k = 0; k < radii.size(); ++k) {
    const double r = radii[k];
    const int di_max = static_cast<int>(r / g.hx);
    const int dj_max = static_cast<int>(r / g.hy);
    std::vector<std::pair<int, int>> offsets;
    for (int dj = 0; dj <= dj_max; ++dj)
      for (int di = (dj == 0 ? 1 : -di_max); di <= di_max; ++di)
        if (di * g.hx * di * g.hx + dj * g.hy * dj * g.hy <= r * r)
          offsets.emplace_back(di, dj);
    double best = 0.0;
    for (int j = margin; j < g.ny - margin; ++j)
      for (int i = margin; i < g.nx - margin; ++i) {
        const double a = v(i, j);
        for (auto [di, dj] : offsets) {
          const int i2 = i + di, j2 = j + dj;
          if (i2 < margin || i2 >= g.nx - margin || j2 >= g.ny - margin)
            continue;
          best = std::max(best, std::abs(a - v(i2, j2)));
        }
      }
    out[k] = best;
  }
  return out;
}

}  // namespace detail

// Modulus of a composition g(grad u) for a continuous g vanishing on the
// unit ball, reported next to the moduli of the truncation family.
inline ModulusTable composition_diagnostic(
    const Grid2D& g, const VectorField& gradu,
    const std::function<double(const Vec2&)>& gfun,
    const DiagnosticsConfig& cfg) {
  check_same_grid(g, gradu.grid, "composition_diagnostic");
  cfg.validate();
  // g must vanish on the closed unit ball
  for (int ir = 0; ir <= 20; ++ir)
    for (int ia = 0; ia < 24; ++ia) {
      const double r = ir / 20.0, th = 2.0 * M_PI * ia / 24.0;
      const Vec2 z(r * std::cos(th), r * std::sin(th));
      if (std::abs(gfun(z)) > 1e-12)
        throw NotVanishingOnBall(
            "composition_diagnostic: g does not vanish on B1");
    }

  ScalarField comp(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      comp(i, j) = gfun(cell_gradient(g, gradu, i, j));

  ModulusTable table;
  table.radii = detail::default_modulus_radii(g);
  const int margin = cfg.boundary_margin_cells;
  table.names.push_back("g(grad u)");
  table.omega.push_back(
      detail::pairwise_moduli(g, comp, table.radii, margin));
  table.names.push_back("excess delta=0");
  table.omega.push_back(detail::pairwise_moduli(
      g, compute_excess_modulus(g, gradu, 0.0), table.radii, margin));
  for (double delta : cfg.delta_list) {
    table.names.push_back("excess delta=" + std::to_string(delta));
    table.omega.push_back(detail::pairwise_moduli(
        g, compute_excess_modulus(g, gradu, delta), table.radii, margin));
  }
  return table;
}

// --- continuity study over deltas and directions ---------------------------

struct ContinuitySlice {
  double delta = 0.0;
  int direction_index = -1;  // -1 marks the |grad u| excess slice
  Vec2 direction = {1.0, 0.0};
  ScaleClassification scales;
  double c_fit = 0.0;
  double fit_residual = 0.0;
};

struct ContinuityReport {
  Vec2 center = {0.0, 0.0};
  double r0 = 0.0;
  std::vector<ContinuitySlice> slices;
};

inline ContinuityReport run_continuity_study(const Grid2D& g,
                                             const VectorField& gradu,
                                             const Vec2& center, double r0,
                                             const DiagnosticsConfig& cfg) {
  cfg.validate();
  ContinuityReport report;
  report.center = center;
  report.r0 = r0;

  auto add_slice = [&](double delta, int dir_index, const Vec2& e,
                       const ScalarField& field) {
    ContinuitySlice s;
    s.delta = delta;
    s.direction_index = dir_index;
    s.direction = e;
    s.scales = classify_scales(g, field, center, r0, cfg);
    std::vector<std::pair<double, double>> pairs;
    for (const auto& rec : s.scales.records)
      if (rec.radius < 1.0) pairs.emplace_back(rec.radius, rec.osc);
    if (pairs.size() >= 3) {
      try {
        std::tie(s.c_fit, s.fit_residual) = fit_log_modulus(pairs);
      } catch (const DegenerateFit&) {
        s.c_fit = 0.0;
        s.fit_residual = 0.0;
      }
    }
    report.slices.push_back(std::move(s));
  };

  for (double delta : cfg.delta_list) {
    add_slice(delta, -1, Vec2::Zero(), compute_excess_modulus(g, gradu, delta));
    for (int k = 0; k < cfg.direction_count; ++k) {
      const double th = 2.0 * M_PI * k / cfg.direction_count;
      const Vec2 e(std::cos(th), std::sin(th));
      add_slice(delta, k, e, compute_truncation(g, gradu, e, delta));
    }
  }
  return report;
}

inline nlohmann::json continuity_report_json(const ContinuityReport& r) {
  nlohmann::json slices = nlohmann::json::array();
  for (const auto& s : r.slices) {
    nlohmann::json recs = nlohmann::json::array();
    for (const auto& rec : s.scales.records)
      recs.push_back({{"level", rec.level},
                      {"radius", rec.radius},
                      {"osc", rec.osc},
                      {"annulus_energy", rec.annulus_energy},
                      {"decay", rec.decay},
                      {"energy", rec.energy},
                      {"small", rec.small},
                      {"none", rec.none}});
    slices.push_back({{"delta", s.delta},
                      {"direction_index", s.direction_index},
                      {"ex", s.direction.x()},
                      {"ey", s.direction.y()},
                      {"count_decay", s.scales.count_decay},
                      {"count_energy", s.scales.count_energy},
                      {"count_small", s.scales.count_small},
                      {"final_osc", s.scales.final_osc},
                      {"c_fit", s.c_fit},
                      {"fit_residual", s.fit_residual},
                      {"records", recs}});
  }
  return nlohmann::json{{"center", {r.center.x(), r.center.y()}},
                        {"r0", r.r0},
                        {"slices", slices}};
}

inline std::string continuity_report_csv(const ContinuityReport& r) {
  std::string csv =
      "delta,direction_index,ex,ey,level,radius,osc,annulus_energy,decay,"
      "energy,small,none\n";
  char buf[256];
  for (const auto& s : r.slices)
    for (const auto& rec : s.scales.records) {
      std::snprintf(buf, sizeof buf,
                    "%.17g,%d,%.17g,%.17g,%d,%.17g,%.17g,%.17g,%d,%d,%d,%d\n",
                    s.delta, s.direction_index, s.direction.x(),
                    s.direction.y(), rec.level, rec.radius, rec.osc,
                    rec.annulus_energy, rec.decay ? 1 : 0, rec.energy ? 1 : 0,
                    rec.small ? 1 : 0, rec.none ? 1 : 0);
      csv += buf;
    }
  return csv;
}

}  // namespace degenflow
