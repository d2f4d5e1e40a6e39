// degenflow command line: run and validate experiment configs, export
// field files to CSV.
//
//   degenflow run <config.json> [--out-dir DIR] [--log-level L] [--threads N]
//   degenflow validate <config.json>
//   degenflow export-csv <field-file> [-o out.csv]
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "degenflow/degenflow.hpp"

namespace {

int run_command(const std::string& config_path, const std::string& out_dir,
                const std::string& log_level) {
  degenflow::ExperimentConfig cfg = degenflow::load_config(config_path);
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  degenflow::validate_config(cfg);
  std::ofstream null_sink;
  std::ostream& log = (log_level == "quiet")
                          ? static_cast<std::ostream&>(null_sink)
                          : std::cerr;
  degenflow::run_experiment(cfg, log);
  return 0;
}

int export_command(const std::string& field_path, std::string out_path) {
  if (out_path.empty()) out_path = field_path + ".csv";
  std::ifstream is(field_path, std::ios::binary);
  if (!is) throw degenflow::ConfigInvalid("cannot open " + field_path);
  std::string header;
  std::getline(is, header);
  const auto j = nlohmann::json::parse(header);
  if (j.at("type") == "scalar")
    degenflow::export_csv(out_path, degenflow::load_scalar_field(field_path));
  else
    degenflow::export_csv(out_path, degenflow::load_vector_field(field_path));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"degenflow: a laboratory for very degenerate elliptic flux "
               "problems and congested transport"};
  app.require_subcommand(1);

  std::string config_path, out_dir, log_level = "info", field_path, out_path;
  int threads = 1;

  auto* run = app.add_subcommand("run", "run an experiment config");
  run->add_option("config", config_path, "experiment JSON config")
      ->required();
  run->add_option("--out-dir", out_dir, "override the output directory");
  run->add_option("--log-level", log_level, "info or quiet");
  run->add_option("--threads", threads,
                  "worker hint (results are thread-count independent)");

  auto* validate = app.add_subcommand("validate", "validate a config");
  validate->add_option("config", config_path, "experiment JSON config")
      ->required();

  auto* export_csv = app.add_subcommand("export-csv",
                                        "export a field file to CSV");
  export_csv->add_option("field", field_path, "field file")->required();
  export_csv->add_option("-o,--output", out_path, "output CSV path");

  try {
    app.parse(argc, argv);
    if (run->parsed()) return run_command(config_path, out_dir, log_level);
    if (validate->parsed()) {
      degenflow::load_config(config_path);
      std::cerr << "config ok\n";
      return 0;
    }
    if (export_csv->parsed()) return export_command(field_path, out_path);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const degenflow::ConfigInvalid& e) {
    nlohmann::json err{{"error", "config"}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    nlohmann::json err{{"error", "config"}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    nlohmann::json err{{"error", "numerical"}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 3;
  }
  return 0;
}
