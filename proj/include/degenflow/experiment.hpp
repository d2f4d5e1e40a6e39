#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "degenflow/dual.hpp"
#include "degenflow/errors.hpp"
#include "degenflow/field_io.hpp"
#include "degenflow/grid.hpp"
#include "degenflow/primal.hpp"
#include "degenflow/regularity.hpp"
#include "degenflow/sources.hpp"
#include "degenflow/traffic.hpp"

namespace degenflow {

// Experiment configuration: grid + potential + source + ordered pipeline.
// Stages communicate only through the files they write, so any stage can
// be rerun against an existing output directory.
struct ExperimentConfig {
  Grid2D grid{32, 32, 1.0, 1.0};
  PotentialSpec potential = PotentialSpec::power(2.0);
  std::string source_name;          // builtin source id, or
  nlohmann::json source_params;     // its parameters
  std::string source_file;          // ... a field file instead
  std::vector<std::string> pipeline = {"primal"};
  DiagnosticsConfig diagnostics;
  bool diagnostics_explicit = false;
  TrafficParams traffic;
  PrimalParams primal;
  DualParams dual;
  nlohmann::json diagnose_extra;    // center/r0 overrides
  std::string out_dir = "out";
  uint64_t seed = 0;
};

inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  if (!j.contains("grid")) throw ConfigInvalid("config: missing 'grid'");
  const auto& jg = j["grid"];
  c.grid = Grid2D(jg.value("nx", 32), jg.value("ny", 32),
                  jg.value("lx", 1.0), jg.value("ly", 1.0));
  if (j.contains("potential")) c.potential = j["potential"].get<PotentialSpec>();
  if (!j.contains("source")) throw ConfigInvalid("config: missing 'source'");
  const auto& js = j["source"];
  if (js.contains("file")) {
    c.source_file = js["file"].get<std::string>();
  } else {
    c.source_name = js.value("name", "");
    if (c.source_name.empty())
      throw ConfigInvalid("config: source needs a 'name' or a 'file'");
    c.source_params = js.value("params", nlohmann::json::object());
  }
  if (j.contains("pipeline"))
    c.pipeline = j["pipeline"].get<std::vector<std::string>>();
  if (j.contains("diagnostics")) {
    c.diagnostics = j["diagnostics"].get<DiagnosticsConfig>();
    c.diagnostics_explicit = true;
  }
  if (j.contains("diagnose")) c.diagnose_extra = j["diagnose"];
  if (j.contains("traffic")) {
    const auto& jt = j["traffic"];
    c.traffic.dt = jt.value("dt", c.traffic.dt);
    c.traffic.kappa_factor = jt.value("kappa_factor", c.traffic.kappa_factor);
    c.traffic.seed_threshold =
        jt.value("seed_threshold", c.traffic.seed_threshold);
    c.traffic.audit_sample = jt.value("audit_sample", c.traffic.audit_sample);
    c.traffic.audit_slack = jt.value("audit_slack", c.traffic.audit_slack);
  }
  if (j.contains("primal")) {
    const auto& jp = j["primal"];
    if (jp.contains("eps_schedule"))
      c.primal.eps_schedule = jp["eps_schedule"].get<std::vector<double>>();
    c.primal.report_tol = jp.value("report_tol", c.primal.report_tol);
    c.primal.flux_tol = jp.value("flux_tol", c.primal.flux_tol);
    c.primal.max_newton = jp.value("max_newton", c.primal.max_newton);
  }
  if (j.contains("dual")) {
    const auto& jd = j["dual"];
    c.dual.tau = jd.value("tau", c.dual.tau);
    c.dual.tol = jd.value("tol", c.dual.tol);
    c.dual.max_iter = jd.value("max_iter", c.dual.max_iter);
    c.dual.adapt_tau = jd.value("adapt_tau", c.dual.adapt_tau);
  }
  c.out_dir = j.value("out_dir", "out");
  c.seed = j.value("seed", static_cast<uint64_t>(0));
  c.traffic.seed = c.seed;
  c.primal.seed = c.seed;
}

inline void validate_config(const ExperimentConfig& c) {
  if (c.pipeline.empty()) throw ConfigInvalid("config: empty pipeline");
  const std::vector<std::string> known = {"primal", "dual", "gap", "diagnose",
                                          "traffic"};
  std::vector<std::string> seen;
  for (const auto& stage : c.pipeline) {
    if (std::find(known.begin(), known.end(), stage) == known.end())
      throw ConfigInvalid("config: unknown pipeline stage '" + stage + "'");
    auto before = [&](const char* s) {
      return std::find(seen.begin(), seen.end(), s) != seen.end();
    };
    const bool have_out = std::filesystem::exists(c.out_dir);
    auto artifact = [&](const char* f) {
      return have_out && std::filesystem::exists(
                             std::filesystem::path(c.out_dir) / f);
    };
    if (stage == "gap" && !((before("primal") || artifact("u.field")) &&
                            (before("dual") || artifact("sigma_bar.field"))))
      throw ConfigInvalid("config: gap requires primal and dual results");
    if (stage == "diagnose" && !(before("primal") || artifact("u.field")))
      throw ConfigInvalid("config: diagnose requires a primal result");
    if (stage == "traffic" &&
        !(before("dual") || artifact("sigma_bar.field")))
      throw ConfigInvalid("config: traffic requires a dual result");
    seen.push_back(stage);
  }
  if (!c.source_file.empty() && !std::filesystem::exists(c.source_file))
    throw ConfigInvalid("config: source file does not exist: " +
                        c.source_file);
  if (!c.potential.valid()) throw ConfigInvalid("config: invalid potential");
  c.diagnostics.validate();
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigInvalid("cannot open config file " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigInvalid(std::string("config parse error: ") + e.what());
  }
  ExperimentConfig c = j.get<ExperimentConfig>();
  validate_config(c);
  return c;
}

// --- manifest --------------------------------------------------------------

inline uint64_t fnv1a64_file(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  uint64_t h = 1469598103934665603ull;
  char buf[1 << 16];
  while (is) {
    is.read(buf, sizeof buf);
    for (std::streamsize k = 0; k < is.gcount(); ++k)
      h = (h ^ static_cast<unsigned char>(buf[k])) * 1099511628211ull;
  }
  return h;
}

struct ExperimentReport {
  nlohmann::json manifest;
  nlohmann::json summaries;
};

// Runs the pipeline stages in order.  Every stage writes its artifacts
// and reads its inputs back from files, never from another stage's
// in-memory state; the manifest lists every artifact with a content
// hash, so identical config + seed reproduce identical manifests.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg,
                                       std::ostream& log = std::cerr) {
  validate_config(cfg);
  namespace fs = std::filesystem;
  const fs::path out(cfg.out_dir);
  fs::create_directories(out);
  const Grid2D& g = cfg.grid;

  ExperimentReport report;
  auto write_json = [&](const std::string& name, const nlohmann::json& j) {
    std::ofstream os(out / name);
    os << j.dump(2) << "\n";
    report.summaries[name] = j;
  };
  auto write_text = [&](const std::string& name, const std::string& text) {
    std::ofstream os(out / name);
    os << text;
  };

  // source field
  ScalarField f(g);
  if (!cfg.source_file.empty()) {
    f = load_scalar_field(cfg.source_file);
    check_same_grid(g, f.grid, "run_experiment source");
    nlohmann::json js{{"file", cfg.source_file}};
    write_json("source.json", js);
  } else {
    SourceResult src = builtin_sources(g, cfg.source_name, cfg.source_params);
    f = std::move(src.field);
    write_json("source.json", {{"name", cfg.source_name},
                               {"params", cfg.source_params},
                               {"subtracted_mean", src.subtracted_mean}});
  }
  save_field((out / "f.field").string(), f);

  for (const auto& stage : cfg.pipeline) {
    log << "[degenflow] stage " << stage << "\n";
    if (stage == "primal") {
      const PrimalSolution sol = solve_primal(g, cfg.potential, f, cfg.primal);
      save_field((out / "u.field").string(), sol.u);
      save_field((out / "sigma.field").string(), sol.sigma);
      write_json("primal.json", primal_summary(sol));
    } else if (stage == "dual") {
      const DualSolution sol = solve_dual(g, cfg.potential, f, cfg.dual);
      save_field((out / "sigma_bar.field").string(), sol.sigma_bar);
      nlohmann::json js = dual_summary(sol);
      if (fs::exists(out / "primal.json")) {
        // cross-solver certificate when the primal artifacts are present
        const ScalarField u = load_scalar_field((out / "u.field").string());
        PrimalSolution prim;
        prim.u = u;
        const double gap = duality_gap(g, cfg.potential, prim, sol, f);
        js["gap_vs_primal"] = gap;
      }
      write_json("dual.json", js);
    } else if (stage == "gap") {
      PrimalSolution prim;
      prim.u = load_scalar_field((out / "u.field").string());
      DualSolution dual;
      dual.sigma_bar = load_vector_field((out / "sigma_bar.field").string());
      const double p_val = primal_energy(g, cfg.potential, prim.u, f);
      const double d_val = dual_objective(g, cfg.potential, dual.sigma_bar);
      const double gap = p_val + d_val;
      write_json("gap.json",
                 {{"primal_energy", p_val},
                  {"dual_objective", d_val},
                  {"gap", gap},
                  {"relative_gap", relative_gap(gap, p_val, d_val)}});
    } else if (stage == "diagnose") {
      const ScalarField u = load_scalar_field((out / "u.field").string());
      const VectorField gradu = gradient(g, u);
      // default center: the cell with the largest gradient magnitude,
      // pulled to the interior so the scale ladder fits
      Vec2 center(0.5 * g.lx, 0.5 * g.ly);
      double best = -1.0;
      for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
          const double m = cell_gradient(g, gradu, i, j).norm();
          if (m > best) {
            best = m;
            center = {g.cx(i), g.cy(j)};
          }
        }
      // keep at least three scales above the 4-cell resolution floor;
      // with default diagnostics the scale ratio adapts to the grid,
      // explicitly configured values are honored as-is
      DiagnosticsConfig diag = cfg.diagnostics;
      const double r0_cap = 0.45 * std::min(g.lx, g.ly);
      const double needed = 1.05 * 4.0 * std::max(g.hx, g.hy);
      if (!cfg.diagnostics_explicit) {
        const double feasible_eps0 = std::sqrt(needed / r0_cap);
        diag.eps0 = std::min(std::max(diag.eps0, feasible_eps0), 0.9);
      }
      double r0 =
          std::min(std::max(0.25 * std::min(g.lx, g.ly),
                            needed / (diag.eps0 * diag.eps0)),
                   r0_cap);
      if (cfg.diagnose_extra.is_object()) {
        if (cfg.diagnose_extra.contains("center")) {
          center.x() = cfg.diagnose_extra["center"][0].get<double>();
          center.y() = cfg.diagnose_extra["center"][1].get<double>();
        }
        r0 = cfg.diagnose_extra.value("r0", r0);
      }
      center.x() = std::clamp(center.x(), r0, g.lx - r0);
      center.y() = std::clamp(center.y(), r0, g.ly - r0);
      const ContinuityReport rep =
          run_continuity_study(g, gradu, center, r0, diag);
      nlohmann::json jc = continuity_report_json(rep);
      jc["eps0_used"] = diag.eps0;
      write_json("continuity.json", jc);
      write_text("continuity.csv", continuity_report_csv(rep));
      // composition diagnostic for the excess map (|z|-1)_+^2
      const ModulusTable table = composition_diagnostic(
          g, gradu,
          [](const Vec2& z) {
            const double e = std::max(z.norm() - 1.0, 0.0);
            return e * e;
          },
          cfg.diagnostics);
      nlohmann::json jt{{"radii", table.radii}};
      for (size_t k = 0; k < table.names.size(); ++k)
        jt["omega"][table.names[k]] = table.omega[k];
      write_json("moduli.json", jt);
    } else if (stage == "traffic") {
      const VectorField sigma_bar =
          load_vector_field((out / "sigma_bar.field").string());
      auto [fplus, fminus] = split_source(f);
      TrafficPlan plan =
          trace_curves(g, sigma_bar, fplus, fminus, cfg.traffic);
      if (plan.curves.empty())
        throw EmptyPlan("run_experiment: no traffic to trace");
      plan.intensity = deposit_intensity(plan, g);
      save_field((out / "intensity.field").string(), plan.intensity);
      write_text("curves.csv", curves_csv(plan));

      const double p_exp = cfg.potential.p;
      plan.wardrop = wardrop_audit(
          plan, plan.intensity,
          [p_exp](double i) { return 1.0 + std::pow(i, p_exp - 1.0); },
          cfg.traffic);
      write_json("wardrop.json",
                 wardrop_json(plan.wardrop, cfg.traffic.audit_slack));

      const ScalarField mag = colocated_magnitude(g, sigma_bar);
      double diff = 0.0, ref = 0.0;
      for (int c = 0; c < g.cells(); ++c) {
        diff += std::abs(plan.intensity.values[c] - mag.values[c]);
        ref += std::abs(mag.values[c]);
      }
      write_json("traffic.json",
                 {{"curves", plan.curves.size()},
                  {"total_weight", plan.total_weight},
                  {"terminal_error", plan.terminal_error},
                  {"terminal_error_relative",
                   plan.total_weight > 0.0
                       ? plan.terminal_error / plan.total_weight
                       : 0.0},
                  {"intensity_identity_l1", ref > 0.0 ? diff / ref : 0.0},
                  {"wardrop_pass_fraction",
                   wardrop_pass_fraction(plan.wardrop)}});
    }
  }

  // manifest with content hashes, sorted for determinism
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(out))
    if (entry.is_regular_file() && entry.path().filename() != "manifest.json")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  nlohmann::json artifacts = nlohmann::json::array();
  char hex[32];
  for (const auto& p : files) {
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(fnv1a64_file(p)));
    artifacts.push_back({{"path", p.filename().string()},
                         {"bytes", fs::file_size(p)},
                         {"fnv1a64", hex}});
  }
  report.manifest = {{"artifacts", artifacts},
                     {"pipeline", cfg.pipeline},
                     {"seed", cfg.seed}};
  std::ofstream os(out / "manifest.json");
  os << report.manifest.dump(2) << "\n";
  return report;
}

}  // namespace degenflow
