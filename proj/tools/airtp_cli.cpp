#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "airtp/airtp.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitOracleFailure = 3;

std::string output_dir(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("AIRTP_OUT_DIR"); env && *env) return env;
  return "results";
}

int run_subcommand(const std::string& config_path, const std::vector<std::string>& overrides,
                   const std::string& out_flag, std::int64_t seed_flag) {
  airtp::ExperimentConfig cfg;
  try {
    cfg = airtp::load_config(config_path, overrides);
    if (seed_flag >= 0) cfg.seeds = {static_cast<std::uint64_t>(seed_flag)};
    cfg.validate();
  } catch (const airtp::Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  }

  const std::filesystem::path dir = output_dir(out_flag);
  std::filesystem::create_directories(dir);

  const std::vector<airtp::ResultRecord> records = airtp::run_experiment(cfg);
  const std::string stem = airtp::to_string(cfg.id);
  airtp::write_results(records, (dir / (stem + ".csv")).string());
  airtp::write_summary(records, (dir / (stem + "_summary.json")).string());
  std::ofstream eff(dir / (stem + "_config.toml"));
  eff << airtp::dump_config(cfg);
  std::cout << records.size() << " records -> " << (dir / (stem + ".csv")).string() << "\n";

  if (cfg.id == airtp::ExperimentId::oracle_check) {
    for (const airtp::ResultRecord& r : records)
      if (r.metric.size() > 5 && r.metric.substr(r.metric.size() - 5) == "_pass" &&
          r.value != 1.0) {
        std::cerr << "oracle margin failed: " << r.metric << "\n";
        return kExitOracleFailure;
      }
  }
  return kExitOk;
}

int oracle_check_subcommand(std::int64_t seed_flag, const std::string& out_flag) {
  const std::uint64_t seed = seed_flag >= 0 ? static_cast<std::uint64_t>(seed_flag) : 2024;
  const std::vector<airtp::OracleCheck> checks = airtp::run_oracle_checks(seed);
  int failures = 0;
  for (const airtp::OracleCheck& c : checks) {
    std::printf("%-38s margin=%11.3e tol=%9.3e %s\n", c.name.c_str(), c.margin, c.tolerance,
                c.pass ? "PASS" : "FAIL");
    failures += c.pass ? 0 : 1;
  }
  if (!out_flag.empty()) {
    std::filesystem::create_directories(out_flag);
    std::vector<airtp::ResultRecord> records;
    for (const airtp::OracleCheck& c : checks)
      records.push_back({"oracle_check", "{}", c.name + "_margin", c.margin, seed, ""});
    airtp::write_results(records, (std::filesystem::path(out_flag) / "oracle_check.csv").string());
  }
  std::printf("%d/%zu checks passed\n", static_cast<int>(checks.size()) - failures,
              checks.size());
  return failures == 0 ? kExitOk : kExitOracleFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulator for tensor-parallel transformer inference with over-the-air all-reduce"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;
  std::int64_t seed = -1;

  CLI::App* run = app.add_subcommand("run", "run an experiment described by a config file");
  run->add_option("config", config_path, "TOML config file")->required();
  run->add_option("--out", out_dir, "output directory (default: results/ or AIRTP_OUT_DIR)");
  run->add_option("--override", overrides, "config override, section.key=value")
      ->take_all();
  run->add_option("--seed", seed, "replace the configured seed list with one seed");

  CLI::App* oracle = app.add_subcommand("oracle-check", "run every brute-force oracle check");
  oracle->add_option("--seed", seed, "oracle seed");
  oracle->add_option("--out", out_dir, "also write margins as CSV into this directory");

  CLI::App* defaults = app.add_subcommand("print-defaults", "print the default config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfigError;
  }

  try {
    if (run->parsed()) return run_subcommand(config_path, overrides, out_dir, seed);
    if (oracle->parsed()) return oracle_check_subcommand(seed, out_dir);
    if (defaults->parsed()) {
      std::cout << airtp::dump_config(airtp::default_config());
      return kExitOk;
    }
  } catch (const airtp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const airtp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
