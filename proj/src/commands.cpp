#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "inference.hpp"
#include "stats.hpp"

namespace excomp {

namespace {

using nlohmann::ordered_json;

std::string format_fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

ordered_json coding_json(const TreatmentCoding& coding) {
  ordered_json j;
  j["index_arms"] = coding.index_arms;
  j["external_arms"] = coding.external_arms;
  j["index_only"] = coding.index_only;
  j["external_only"] = coding.external_only;
  if (coding.shared_arm) {
    j["shared_arm"] = *coding.shared_arm;
  } else {
    j["shared_arm"] = nullptr;
  }
  return j;
}

ordered_json inference_json(const InferenceResult& inf) {
  ordered_json j;
  j["se"] = inf.se;
  j["ci_low"] = inf.ci_low;
  j["ci_high"] = inf.ci_high;
  j["level"] = inf.level;
  j["method"] = inf.method;
  if (inf.method == "bootstrap-percentile") {
    j["resamples"] = inf.resamples;
    j["seed"] = inf.seed;
    j["dropped"] = inf.dropped;
  }
  return j;
}

ordered_json falsification_json(const FalsificationReport& report) {
  ordered_json j;
  j["delta_hat"] = report.delta_hat;
  j["se"] = report.se;
  j["z"] = report.z;
  j["p_value"] = report.p_value;
  j["standardized_prediction_gap"] = report.standardized_prediction_gap;
  j["interpretation"] =
      std::string("shared-arm restriction ") +
      (report.p_value < 0.05 ? "is rejected" : "is not rejected") +
      " at the 5% level; small p-values cast doubt on mean transportability of the shared arm";
  return j;
}

struct LoadedData {
  CompositeDataset ds;
  LoadReport report;
};

LoadedData load_for(const RunConfig& config) {
  LoadOptions options;
  options.drop_incomplete = config.drop_incomplete;
  LoadReport report;
  CompositeDataset ds =
      load_csv(config.data_path, config.coding, config.all_covariates(), options, &report);
  return {std::move(ds), report};
}

ordered_json dataset_json(const CompositeDataset& ds, const LoadReport& report) {
  ordered_json j;
  j["rows"] = ds.rows();
  j["n_index"] = ds.n_index;
  j["n_external"] = ds.n_external;
  j["rows_dropped"] = report.rows_dropped;
  j["covariates"] = ds.covariate_names;
  return j;
}

}  // namespace

std::string library_version() { return "0.1.0"; }

nlohmann::ordered_json cmd_estimate(const RunConfig& config) {
  LoadedData data = load_for(config);
  return estimate_document(data.ds, data.report, config);
}

nlohmann::ordered_json estimate_document(const CompositeDataset& ds, const LoadReport& report,
                                         const RunConfig& config) {
  const std::vector<Cell> cells = cells_for(ds.coding, config.estimands);
  const EstimationConfig est_config = config.estimation_config();
  const NuisanceSet ns = fit_nuisances(ds, est_config.participation, est_config.treatment,
                                       est_config.outcome, cells, est_config.nuisance_options);

  // lambda is reported alongside phi
  std::vector<Estimand> estimands = config.estimands;
  if (std::find(estimands.begin(), estimands.end(), Estimand::phi) != estimands.end() &&
      std::find(estimands.begin(), estimands.end(), Estimand::lambda) == estimands.end()) {
    estimands.push_back(Estimand::lambda);
  }

  std::vector<BootstrapBatchEntry> boot;
  if (config.inference == "bootstrap") {
    boot = bootstrap_batch(ds, est_config, estimands, config.methods, config.scale,
                           config.bootstrap_resamples, config.bootstrap_seed, config.level,
                           config.threads);
  }

  ordered_json doc;
  doc["command"] = "estimate";
  doc["version"] = library_version();
  doc["data"] = dataset_json(ds, report);
  doc["coding"] = coding_json(ds.coding);
  doc["inference"] = config.inference;

  std::ostringstream table;
  table << "estimand  method   estimate          se      ci_low     ci_high\n";
  ordered_json results = ordered_json::array();
  std::size_t boot_index = 0;
  for (Estimand estimand : estimands) {
    for (Method method : config.methods) {
      const ContrastEstimate est = estimate(ds, ns, estimand, method, config.scale);
      ordered_json row;
      row["estimand"] = estimand_name(estimand);
      row["method"] = method_name(method);
      row["scale"] = est.scale == Scale::ratio ? "ratio" : "difference";
      row["estimate"] = est.value;
      if (est.shared_arm) row["shared_arm"] = *est.shared_arm;
      if (est.comparator_mean) row["comparator_mean"] = *est.comparator_mean;
      ordered_json components;
      for (const auto& [label, value] : est.components) components[label] = value;
      row["cell_means"] = components;

      bool have_inference = false;
      InferenceResult inf;
      if (config.inference == "bootstrap") {
        inf = boot[boot_index].inference;
        have_inference = true;
      } else if (config.inference == "if-plugin" && method == Method::aw1) {
        inf = if_variance(est, ds.rows(), config.level);
        have_inference = true;
      }
      if (have_inference) row["inference"] = inference_json(inf);
      results.push_back(row);

      char line[200];
      if (have_inference) {
        std::snprintf(line, sizeof(line), "%-9s %-6s %10.4f  %10.4f  %10.4f  %10.4f\n",
                      estimand_name(estimand).c_str(), method_name(method).c_str(), est.value,
                      inf.se, inf.ci_low, inf.ci_high);
      } else {
        std::snprintf(line, sizeof(line), "%-9s %-6s %10.4f %11s %11s %11s\n",
                      estimand_name(estimand).c_str(), method_name(method).c_str(), est.value, "-",
                      "-", "-");
      }
      table << line;
      ++boot_index;
    }
  }
  doc["results"] = results;

  if (ds.coding.shared_arm) {
    const FalsificationReport report = shared_arm_test(ds, ns);
    doc["falsification"] = falsification_json(report);
    table << "falsification: delta_hat=" << format_fixed(report.delta_hat)
          << " se=" << format_fixed(report.se) << " z=" << format_fixed(report.z)
          << " p=" << format_fixed(report.p_value, 6) << "\n";
  }

  doc["table"] = table.str();
  return doc;
}

nlohmann::ordered_json cmd_diagnose(const RunConfig& config) {
  LoadedData data = load_for(config);
  return diagnose_document(data.ds, data.report, config);
}

nlohmann::ordered_json diagnose_document(const CompositeDataset& ds, const LoadReport& report,
                                         const RunConfig& config) {
  ds.coding.require_shared();

  const std::vector<Cell> cells = cells_for(ds.coding, {Estimand::delta});
  const EstimationConfig est_config = config.estimation_config();
  const NuisanceSet ns = fit_nuisances(ds, est_config.participation, est_config.treatment,
                                       est_config.outcome, cells, est_config.nuisance_options);
  const FalsificationReport diag = shared_arm_test(ds, ns);

  ordered_json doc;
  doc["command"] = "diagnose";
  doc["version"] = library_version();
  doc["data"] = dataset_json(ds, report);
  doc["coding"] = coding_json(ds.coding);
  doc["falsification"] = falsification_json(diag);

  std::ostringstream table;
  table << "shared-arm falsification diagnostic\n"
        << "  delta_hat                    " << format_fixed(diag.delta_hat, 6) << "\n"
        << "  se                           " << format_fixed(diag.se, 6) << "\n"
        << "  z                            " << format_fixed(diag.z, 6) << "\n"
        << "  p_value                      " << format_fixed(diag.p_value, 6) << "\n"
        << "  standardized_prediction_gap  " << format_fixed(diag.standardized_prediction_gap, 6)
        << "\n"
        << "  " << doc["falsification"]["interpretation"].get<std::string>() << "\n";
  doc["table"] = table.str();
  return doc;
}

namespace {

ordered_json scenario_json(const SimulationScenario& scenario, const ScenarioRun& run) {
  ordered_json j;
  j["name"] = scenario.name;
  j["n_index"] = scenario.n_index;
  j["n_external"] = scenario.n_external;
  j["iterations"] = scenario.iterations;
  j["seed"] = scenario.base_seed;
  j["misspecify_pe"] = scenario.misspecify_participation_treatment;
  j["misspecify_g"] = scenario.misspecify_outcome;
  j["iterations_failed"] = run.iterations_failed;
  ordered_json rows = ordered_json::array();
  for (const MetricsRow& row : run.metrics) {
    ordered_json r;
    r["estimand"] = estimand_name(row.estimand);
    r["method"] = method_name(row.method);
    r["bias"] = row.bias;
    r["se"] = row.empirical_se;
    r["mse"] = row.mse;
    r["iterations_used"] = row.iterations_used;
    rows.push_back(r);
  }
  j["metrics"] = rows;
  j["csv"] = metrics_csv(run.metrics);
  j["table"] = metrics_table(run.metrics);
  return j;
}

}  // namespace

nlohmann::ordered_json cmd_simulate(const SimulateConfig& config, int threads) {
  const ScenarioRun run = run_scenario(config.scenario, config.dgp, threads);
  ordered_json doc;
  doc["command"] = "simulate";
  doc["version"] = library_version();
  doc["scenarios"] = ordered_json::array({scenario_json(config.scenario, run)});
  doc["table"] = "scenario " + config.scenario.name + "\n" + metrics_table(run.metrics);
  return doc;
}

nlohmann::ordered_json cmd_simulate_full(const Overrides& overrides) {
  struct GridEntry {
    std::string name;
    long n1, n0;
    bool pe, g;
  };
  const std::vector<GridEntry> grid = {
      {"correct_n1000", 500, 500, false, false},
      {"correct_n1000_index800", 800, 200, false, false},
      {"correct_n1000_index200", 200, 800, false, false},
      {"correct_n2000", 1000, 1000, false, false},
      {"correct_n10000", 5000, 5000, false, false},
      {"misspec_pe_n10000", 5000, 5000, true, false},
      {"misspec_g_n10000", 5000, 5000, false, true},
      {"misspec_all_n10000", 5000, 5000, true, true},
  };
  const DgpParams params = DgpParams::defaults();
  const int threads = overrides.threads ? *overrides.threads : 1;

  ordered_json doc;
  doc["command"] = "simulate";
  doc["version"] = library_version();
  doc["scenarios"] = ordered_json::array();
  std::ostringstream table;
  for (const GridEntry& entry : grid) {
    SimulationScenario scenario;
    scenario.name = entry.name;
    scenario.n_index = entry.n1;
    scenario.n_external = entry.n0;
    scenario.misspecify_participation_treatment = entry.pe;
    scenario.misspecify_outcome = entry.g;
    scenario.iterations = overrides.iterations ? *overrides.iterations : 10000;
    if (overrides.seed) scenario.base_seed = *overrides.seed;
    const ScenarioRun run = run_scenario(scenario, params, threads);
    doc["scenarios"].push_back(scenario_json(scenario, run));
    table << "scenario " << scenario.name << "\n" << metrics_table(run.metrics) << "\n";
  }
  doc["table"] = table.str();
  return doc;
}

}  // namespace excomp
