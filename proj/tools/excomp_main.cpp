// excomp command line: estimate, diagnose and simulate subcommands over the
// shared library's C interface.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "excomp.h"

namespace {

using nlohmann::json;

struct CommonFlags {
  std::string config;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<long> iterations;
  bool full = false;
  bool drop_incomplete = false;
  std::string known_e;
  std::optional<double> truncate;
  int threads = 0;
};

std::string overrides_json(const CommonFlags& flags) {
  json j = json::object();
  if (!flags.data.empty()) j["data"] = flags.data;
  if (flags.seed) j["seed"] = *flags.seed;
  if (flags.iterations) j["iterations"] = *flags.iterations;
  if (flags.full) j["full"] = true;
  if (flags.drop_incomplete) j["drop_incomplete"] = true;
  if (!flags.known_e.empty()) j["known_e"] = flags.known_e;
  if (flags.truncate) j["truncate"] = *flags.truncate;
  if (flags.threads > 0) j["threads"] = flags.threads;
  return j.dump();
}

int write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    std::cerr << "error: cannot write " << path << "\n";
    return 1;
  }
  out << content;
  return 0;
}

int emit(const char* result, const std::string& out_dir) {
  const json doc = json::parse(result);
  if (doc.contains("table")) std::cout << doc["table"].get<std::string>();
  if (out_dir.empty()) return 0;
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path base(out_dir);
  if (write_file(base / "result.json", result) != 0) return 1;
  if (doc.contains("scenarios")) {
    for (const auto& scenario : doc["scenarios"]) {
      const std::string name = scenario["name"].get<std::string>();
      if (write_file(base / ("metrics_" + name + ".csv"), scenario["csv"].get<std::string>()) != 0)
        return 1;
      if (write_file(base / ("metrics_" + name + ".txt"), scenario["table"].get<std::string>()) != 0)
        return 1;
    }
  }
  return 0;
}

int run(excomp_status status, char* result, const std::string& out_dir) {
  if (status != EXCOMP_OK) {
    std::cerr << "error: " << excomp_last_error() << "\n";
    excomp_free_string(result);
    return status;
  }
  const int rc = emit(result, out_dir);
  excomp_free_string(result);
  return rc;
}

void add_common(CLI::App* cmd, CommonFlags& flags, bool with_data_flags) {
  cmd->add_option("--config", flags.config, "configuration file");
  cmd->add_option("--out", flags.out, "output directory");
  cmd->add_option("--seed", flags.seed, "override the configured seed");
  cmd->add_option("--iterations", flags.iterations,
                  "override iterations (simulate) or bootstrap resamples (estimate)");
  cmd->add_option("--threads", flags.threads, "worker threads (results do not depend on this)");
  if (with_data_flags) {
    cmd->add_option("--data", flags.data, "override the configured data path");
    cmd->add_flag("--drop-incomplete", flags.drop_incomplete,
                  "listwise-delete rows with missing values");
    cmd->add_option("--known-e", flags.known_e,
                    "fixed treatment probabilities, e.g. 1:1=0.5,0:2=0.5");
    cmd->add_option("--truncate", flags.truncate,
                    "clip fitted probabilities into [eps, 1-eps]");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"external comparator estimation via transportability in mean or effect measure"};
  app.require_subcommand(1);

  CommonFlags est_flags, diag_flags, sim_flags;
  CLI::App* estimate = app.add_subcommand("estimate", "estimate contrasts from a composite dataset");
  add_common(estimate, est_flags, true);
  CLI::App* diagnose =
      app.add_subcommand("diagnose", "run the shared-arm falsification diagnostic");
  add_common(diagnose, diag_flags, true);
  CLI::App* simulate = app.add_subcommand("simulate", "run the simulation harness");
  add_common(simulate, sim_flags, false);
  simulate->add_flag("--full", sim_flags.full, "run the built-in full scenario grid");

  CLI11_PARSE(app, argc, argv);

  char* result = nullptr;
  if (estimate->parsed()) {
    if (est_flags.config.empty()) {
      std::cerr << "error: estimate requires --config\n";
      return EXCOMP_ERR_CONFIG;
    }
    const excomp_status status =
        excomp_run_estimate(est_flags.config.c_str(), overrides_json(est_flags).c_str(), &result);
    return run(status, result, est_flags.out);
  }
  if (diagnose->parsed()) {
    if (diag_flags.config.empty()) {
      std::cerr << "error: diagnose requires --config\n";
      return EXCOMP_ERR_CONFIG;
    }
    const excomp_status status =
        excomp_run_diagnose(diag_flags.config.c_str(), overrides_json(diag_flags).c_str(), &result);
    return run(status, result, diag_flags.out);
  }
  if (simulate->parsed()) {
    if (sim_flags.config.empty() && !sim_flags.full) {
      std::cerr << "error: simulate requires --config or --full\n";
      return EXCOMP_ERR_CONFIG;
    }
    const excomp_status status =
        excomp_run_simulate(sim_flags.config.empty() ? nullptr : sim_flags.config.c_str(),
                            overrides_json(sim_flags).c_str(), &result);
    return run(status, result, sim_flags.out);
  }
  return EXCOMP_ERR_CONFIG;
}
