#include "simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

#include <Eigen/Cholesky>

#include "stats.hpp"

namespace excomp {

namespace {

constexpr std::uint64_t kCalibrationSeed = 0x0c0ffee5a1adULL;

std::vector<std::string> covariate_labels(int k) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(k));
  for (int j = 1; j <= k; ++j) names.push_back("x" + std::to_string(j));
  return names;
}

TreatmentCoding dgp_coding() {
  return TreatmentCoding::make({0, 1}, {0, 2}, 1, 2, 0);
}

}  // namespace

DgpParams DgpParams::defaults() {
  DgpParams p;
  p.selection_slopes = Eigen::VectorXd::Constant(p.covariate_count, std::log(2.0));
  p.arm1_slopes = Eigen::VectorXd::Ones(p.covariate_count);
  p.arm2_slopes = Eigen::VectorXd::Ones(p.covariate_count);
  p.arm0_slopes = Eigen::VectorXd::Constant(p.covariate_count, -1.0);
  return p;
}

void DgpParams::validate() const {
  if (covariate_count < 1) throw ConfigError("dgp needs at least one covariate");
  const double lower = -1.0 / static_cast<double>(covariate_count - 1 > 0 ? covariate_count - 1 : 1);
  if (!(pairwise_covariance > lower && pairwise_covariance < 1.0)) {
    throw ConfigError("pairwise covariance must keep the covariance matrix positive definite");
  }
  if (!(treat_prob > 0.0 && treat_prob < 1.0)) {
    throw ConfigError("treatment probability must lie in (0,1)");
  }
  if (selection_slopes.size() != covariate_count || arm1_slopes.size() != covariate_count ||
      arm2_slopes.size() != covariate_count || arm0_slopes.size() != covariate_count) {
    throw ConfigError("dgp slope vectors must have one entry per covariate");
  }
  if (!(noise_sd >= 0.0)) throw ConfigError("noise sd must be nonnegative");
  if (calibration_draws < 1000) throw ConfigError("calibration needs at least 1000 draws");
}

void SimulationScenario::validate() const {
  if (iterations < 1) throw ConfigError("scenario needs at least one iteration");
  if (n_index < 20 || n_external < 20) {
    throw ConfigError("scenario source sizes must be at least 20");
  }
  if (methods.empty()) throw ConfigError("scenario requests no methods");
  if (estimands.empty()) throw ConfigError("scenario requests no estimands");
  for (Estimand e : estimands) {
    if (e == Estimand::lambda) throw ConfigError("scenario estimands are psi, phi, delta");
  }
  if (known_treat_prob && !(*known_treat_prob > 0.0 && *known_treat_prob < 1.0)) {
    throw ConfigError("known treatment probability must lie in (0,1)");
  }
}

EstimationConfig SimulationScenario::estimation_config(const DgpParams& params) const {
  const std::vector<std::string> names = covariate_labels(params.covariate_count);
  EstimationConfig config;
  config.participation.family = Family::bernoulli_logit;
  config.treatment.family = Family::bernoulli_logit;
  config.outcome.family = Family::gaussian_identity;
  if (!misspecify_participation_treatment) {
    config.participation.covariates = names;
    config.treatment.covariates = names;
  }
  if (!misspecify_outcome) {
    config.outcome.covariates = names;
  }
  if (known_treat_prob) {
    const double p_active = *known_treat_prob;
    config.nuisance_options.known_treatment_probs[Cell{1, 1}] = p_active;
    config.nuisance_options.known_treatment_probs[Cell{1, 0}] = 1.0 - p_active;
    config.nuisance_options.known_treatment_probs[Cell{0, 2}] = p_active;
    config.nuisance_options.known_treatment_probs[Cell{0, 0}] = 1.0 - p_active;
  }
  return config;
}

Eigen::MatrixXd draw_covariates(long n, const DgpParams& params, Rng& rng) {
  params.validate();
  const int k = params.covariate_count;
  Eigen::MatrixXd sigma =
      Eigen::MatrixXd::Constant(k, k, params.pairwise_covariance);
  sigma.diagonal().setOnes();
  const Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw ConfigError("covariate covariance matrix is not positive definite");
  }
  const Eigen::MatrixXd chol_lower = llt.matrixL();
  Eigen::MatrixXd z(n, k);
  for (long i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) z(i, j) = rng.normal();
  }
  return z * chol_lower.transpose();
}

double calibrate_alpha0(const DgpParams& params, double target_fraction, long draws) {
  if (!(target_fraction > 0.01 && target_fraction < 0.99)) {
    throw ConfigError("target index fraction must lie in (0.01, 0.99)");
  }
  Rng rng(kCalibrationSeed);
  const Eigen::MatrixXd x = draw_covariates(draws, params, rng);
  const Eigen::VectorXd linear = x * params.selection_slopes;
  auto mean_prob = [&](double alpha0) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < linear.size(); ++i) sum += expit(alpha0 + linear[i]);
    return sum / static_cast<double>(linear.size());
  };
  double lo = -40.0, hi = 40.0;
  // expit spans (0,1), so the bracket always holds
  for (int it = 0; it < 80 && hi - lo > 1e-9; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mean_prob(mid) < target_fraction) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double alpha0 = 0.5 * (lo + hi);
  const double achieved = mean_prob(alpha0);
  if (std::abs(achieved - target_fraction) > 1e-3) {
    throw ScenarioFailure("selection intercept calibration missed the target fraction");
  }
  return alpha0;
}

CompositeDataset generate_dataset(const SimulationScenario& scenario, const DgpParams& params,
                                  double alpha0, long iteration) {
  const long n = scenario.total_rows();
  for (int attempt = 0; attempt < 10; ++attempt) {
    Rng rng(mix_seed(scenario.base_seed, static_cast<std::uint64_t>(iteration),
                     static_cast<std::uint64_t>(attempt)));
    Eigen::MatrixXd x = draw_covariates(n, params, rng);
    Eigen::VectorXi source(n), arm(n);
    Eigen::VectorXd outcome(n);
    long n_index = 0;
    for (long i = 0; i < n; ++i) {
      const double p = expit(alpha0 + x.row(i).dot(params.selection_slopes));
      const int s = rng.uniform() < p ? 1 : 0;
      const bool active = rng.uniform() < params.treat_prob;
      const int a = s == 1 ? (active ? 1 : 0) : (active ? 2 : 0);
      const Eigen::VectorXd& slopes =
          a == 1 ? params.arm1_slopes : (a == 2 ? params.arm2_slopes : params.arm0_slopes);
      outcome[i] = params.outcome_intercept + x.row(i).dot(slopes) + params.noise_sd * rng.normal();
      source[i] = s;
      arm[i] = a;
      if (s == 1) ++n_index;
    }
    if (n_index == 0 || n_index == n) continue;
    return make_dataset(std::move(x), std::move(source), std::move(arm), std::move(outcome),
                        covariate_labels(params.covariate_count), dgp_coding());
  }
  throw ScenarioFailure("all rows fell in a single source for 10 consecutive sub-streams");
}

namespace {

const std::vector<Estimand> kEstimandOrder = {Estimand::psi, Estimand::phi, Estimand::delta};
const std::vector<Method> kMethodOrder = {Method::om,  Method::w1,  Method::w2,
                                          Method::aw1, Method::aw2, Method::aw3};

template <typename T>
bool requested(const std::vector<T>& v, T value) {
  return std::find(v.begin(), v.end(), value) != v.end();
}

}  // namespace

ScenarioRun run_scenario(const SimulationScenario& scenario, const DgpParams& params, int threads) {
  scenario.validate();
  params.validate();
  const double alpha0 =
      calibrate_alpha0(params, scenario.target_index_fraction(), params.calibration_draws);
  const EstimationConfig config = scenario.estimation_config(params);

  std::vector<Estimand> estimands;
  for (Estimand e : kEstimandOrder) {
    if (requested(scenario.estimands, e)) estimands.push_back(e);
  }
  std::vector<Method> methods;
  for (Method m : kMethodOrder) {
    if (requested(scenario.methods, m)) methods.push_back(m);
  }
  const std::vector<Cell> cells = cells_for(dgp_coding(), estimands);
  const std::size_t combos = estimands.size() * methods.size();

  const long iters = scenario.iterations;
  std::vector<double> estimates(static_cast<std::size_t>(iters) * combos,
                                std::numeric_limits<double>::quiet_NaN());
  std::vector<char> failed(static_cast<std::size_t>(iters), 0);

  parallel_for(iters, threads, [&](long it) {
    try {
      const CompositeDataset ds = generate_dataset(scenario, params, alpha0, it);
      const NuisanceSet ns = fit_nuisances(ds, config.participation, config.treatment,
                                           config.outcome, cells, config.nuisance_options);
      std::size_t slot = static_cast<std::size_t>(it) * combos;
      for (Estimand e : estimands) {
        for (Method m : methods) {
          estimates[slot++] = estimate(ds, ns, e, m).value;
        }
      }
    } catch (const Error&) {
      failed[static_cast<std::size_t>(it)] = 1;
    }
  });

  long n_failed = 0;
  for (char f : failed) n_failed += f;
  if (static_cast<double>(n_failed) > 0.01 * static_cast<double>(iters)) {
    throw ScenarioFailure(std::to_string(n_failed) + " of " + std::to_string(iters) +
                          " iterations failed estimation (>1%)");
  }

  ScenarioRun run;
  run.iterations_requested = iters;
  run.iterations_failed = n_failed;
  const long kept = iters - n_failed;
  std::size_t combo = 0;
  for (Estimand e : estimands) {
    for (Method m : methods) {
      Eigen::VectorXd values(kept);
      Eigen::Index out = 0;
      for (long it = 0; it < iters; ++it) {
        if (!failed[static_cast<std::size_t>(it)]) {
          values[out++] = estimates[static_cast<std::size_t>(it) * combos + combo];
        }
      }
      MetricsRow row;
      row.estimand = e;
      row.method = m;
      row.iterations_used = kept;
      row.bias = values.mean();  // the generated contrasts are all zero
      row.empirical_se = kept > 1 ? sample_sd(values) : 0.0;
      row.mse = row.bias * row.bias + row.empirical_se * row.empirical_se;
      run.metrics.push_back(row);
      ++combo;
    }
  }
  return run;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream out;
  out << "estimand,method,bias,se,mse,iterations_used\n";
  char buf[64];
  for (const MetricsRow& row : rows) {
    out << estimand_name(row.estimand) << "," << method_name(row.method);
    for (double v : {row.bias, row.empirical_se, row.mse}) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << "," << buf;
    }
    out << "," << row.iterations_used << "\n";
  }
  return out.str();
}

std::string metrics_table(const std::vector<MetricsRow>& rows) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-9s %-7s %12s %12s %12s %12s\n", "estimand", "method", "bias",
                "se", "mse", "iterations");
  out << line;
  for (const MetricsRow& row : rows) {
    std::snprintf(line, sizeof(line), "%-9s %-7s %12.4f %12.4f %12.4f %12ld\n",
                  estimand_name(row.estimand).c_str(), method_name(row.method).c_str(), row.bias,
                  row.empirical_se, row.mse, row.iterations_used);
    out << line;
  }
  return out.str();
}

std::vector<MetricsRow> parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw BadValue("metrics CSV is empty");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream cells(line);
    std::string estimand, method, bias, se, mse, used;
    std::getline(cells, estimand, ',');
    std::getline(cells, method, ',');
    std::getline(cells, bias, ',');
    std::getline(cells, se, ',');
    std::getline(cells, mse, ',');
    std::getline(cells, used, ',');
    MetricsRow row;
    row.estimand = estimand_from_name(estimand);
    row.method = method_from_name(method);
    row.bias = std::stod(bias);
    row.empirical_se = std::stod(se);
    row.mse = std::stod(mse);
    row.iterations_used = std::stol(used);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace excomp
