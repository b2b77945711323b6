#include "inference.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "rng.hpp"
#include "stats.hpp"

namespace excomp {

InferenceResult if_variance(const ContrastEstimate& estimate, Eigen::Index n, double level) {
  if (!estimate.if_contributions) {
    throw MissingContributions("influence-function variance requires AW1 contributions; method " +
                               method_name(estimate.method) + " does not provide them");
  }
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in (0,1)");
  InferenceResult result;
  result.method = "if-plugin";
  result.level = level;
  result.point = estimate.value;
  result.se = std::sqrt(sample_variance(*estimate.if_contributions) / static_cast<double>(n));
  const double z = normal_quantile(0.5 + level / 2.0);
  result.ci_low = result.point - z * result.se;
  result.ci_high = result.point + z * result.se;
  return result;
}

namespace {

CompositeDataset resample_stratified(const CompositeDataset& ds, Rng& rng) {
  const std::vector<Eigen::Index> index_rows = stratify(ds, 1);
  const std::vector<Eigen::Index> external_rows = stratify(ds, 0);
  const Eigen::Index n = ds.rows();
  Eigen::MatrixXd x(n, ds.x.cols());
  Eigen::VectorXi source(n), arm(n);
  Eigen::VectorXd outcome(n);
  Eigen::Index out = 0;
  auto draw_from = [&](const std::vector<Eigen::Index>& rows) {
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const Eigen::Index pick = rows[rng.index(rows.size())];
      x.row(out) = ds.x.row(pick);
      source[out] = ds.source[pick];
      arm[out] = ds.arm[pick];
      outcome[out] = ds.outcome[pick];
      ++out;
    }
  };
  draw_from(index_rows);
  draw_from(external_rows);
  CompositeDataset res;
  res.x = std::move(x);
  res.source = std::move(source);
  res.arm = std::move(arm);
  res.outcome = std::move(outcome);
  res.covariate_names = ds.covariate_names;
  res.coding = ds.coding;
  res.n_index = static_cast<Eigen::Index>(index_rows.size());
  res.n_external = static_cast<Eigen::Index>(external_rows.size());
  return res;
}

}  // namespace

InferenceResult bootstrap_ci(const CompositeDataset& ds, const EstimationConfig& config,
                             Estimand estimand, Method method, Scale scale, long resamples,
                             std::uint64_t seed, double level, int threads) {
  if (resamples < 2) throw ConfigError("bootstrap needs at least 2 resamples");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in (0,1)");

  InferenceResult result;
  result.method = "bootstrap-percentile";
  result.level = level;
  result.resamples = resamples;
  result.seed = seed;
  result.point = run_estimate(ds, config, estimand, method, scale).value;

  std::vector<double> estimates(static_cast<std::size_t>(resamples),
                                std::numeric_limits<double>::quiet_NaN());
  parallel_for(resamples, threads, [&](long b) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(b)));
    const CompositeDataset res = resample_stratified(ds, rng);
    try {
      estimates[static_cast<std::size_t>(b)] = run_estimate(res, config, estimand, method, scale).value;
    } catch (const Error&) {
      // dropped below; counted against the failure budget
    }
  });

  std::vector<double> kept;
  kept.reserve(estimates.size());
  for (double v : estimates) {
    if (std::isfinite(v)) kept.push_back(v);
  }
  result.dropped = resamples - static_cast<long>(kept.size());
  if (static_cast<double>(result.dropped) > 0.01 * static_cast<double>(resamples)) {
    throw TooManyFailedResamples(std::to_string(result.dropped) + " of " +
                                 std::to_string(resamples) +
                                 " bootstrap resamples failed to converge (>1%)");
  }

  Eigen::VectorXd kept_vec = Eigen::Map<Eigen::VectorXd>(kept.data(), static_cast<Eigen::Index>(kept.size()));
  result.se = sample_sd(kept_vec);
  const double alpha = 1.0 - level;
  result.ci_low = quantile_type7(kept, alpha / 2.0);
  result.ci_high = quantile_type7(kept, 1.0 - alpha / 2.0);
  return result;
}

std::vector<BootstrapBatchEntry> bootstrap_batch(const CompositeDataset& ds,
                                                 const EstimationConfig& config,
                                                 const std::vector<Estimand>& estimands,
                                                 const std::vector<Method>& methods, Scale scale,
                                                 long resamples, std::uint64_t seed, double level,
                                                 int threads) {
  if (resamples < 2) throw ConfigError("bootstrap needs at least 2 resamples");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in (0,1)");
  const std::vector<Cell> cells = cells_for(ds.coding, estimands);
  const std::size_t combos = estimands.size() * methods.size();

  auto estimate_all = [&](const CompositeDataset& data, std::vector<double>& out) {
    const NuisanceSet ns = fit_nuisances(data, config.participation, config.treatment,
                                         config.outcome, cells, config.nuisance_options);
    std::size_t slot = 0;
    for (Estimand e : estimands) {
      for (Method m : methods) out[slot++] = estimate(data, ns, e, m, scale).value;
    }
  };

  std::vector<double> point(combos);
  estimate_all(ds, point);

  std::vector<double> draws(static_cast<std::size_t>(resamples) * combos,
                            std::numeric_limits<double>::quiet_NaN());
  std::vector<char> ok(static_cast<std::size_t>(resamples), 0);
  parallel_for(resamples, threads, [&](long b) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(b)));
    const CompositeDataset res = resample_stratified(ds, rng);
    std::vector<double> values(combos);
    try {
      estimate_all(res, values);
    } catch (const Error&) {
      return;  // dropped; counted below
    }
    std::copy(values.begin(), values.end(),
              draws.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(b) * combos));
    ok[static_cast<std::size_t>(b)] = 1;
  });

  long kept_count = 0;
  for (char flag : ok) kept_count += flag;
  const long dropped = resamples - kept_count;
  if (static_cast<double>(dropped) > 0.01 * static_cast<double>(resamples)) {
    throw TooManyFailedResamples(std::to_string(dropped) + " of " + std::to_string(resamples) +
                                 " bootstrap resamples failed to converge (>1%)");
  }

  std::vector<BootstrapBatchEntry> out;
  const double alpha = 1.0 - level;
  std::size_t combo = 0;
  for (Estimand e : estimands) {
    for (Method m : methods) {
      std::vector<double> kept;
      kept.reserve(static_cast<std::size_t>(kept_count));
      for (long b = 0; b < resamples; ++b) {
        if (ok[static_cast<std::size_t>(b)]) {
          kept.push_back(draws[static_cast<std::size_t>(b) * combos + combo]);
        }
      }
      BootstrapBatchEntry entry;
      entry.estimand = e;
      entry.method = m;
      entry.inference.method = "bootstrap-percentile";
      entry.inference.level = level;
      entry.inference.resamples = resamples;
      entry.inference.seed = seed;
      entry.inference.dropped = dropped;
      entry.inference.point = point[combo];
      Eigen::Map<const Eigen::VectorXd> kept_vec(kept.data(),
                                                 static_cast<Eigen::Index>(kept.size()));
      entry.inference.se = sample_sd(kept_vec);
      entry.inference.ci_low = quantile_type7(kept, alpha / 2.0);
      entry.inference.ci_high = quantile_type7(kept, 1.0 - alpha / 2.0);
      out.push_back(std::move(entry));
      ++combo;
    }
  }
  return out;
}

EfficiencyGap efficiency_gap(const CompositeDataset& ds, const NuisanceSet& ns) {
  ds.coding.require_shared();
  const ContrastEstimate psi = estimate_psi(ds, ns, Method::aw1);
  const ContrastEstimate delta = estimate_delta(ds, ns, Method::aw1);
  const Eigen::VectorXd& psi_c = *psi.if_contributions;
  const Eigen::VectorXd& delta_c = *delta.if_contributions;
  const Eigen::VectorXd phi_c = psi_c - delta_c;  // the phi contributions, identically

  EfficiencyGap gap;
  gap.var_phi = sample_variance(phi_c);
  gap.var_psi = sample_variance(psi_c);
  gap.var_delta = sample_variance(delta_c);
  gap.cov_psi_delta = sample_covariance(psi_c, delta_c);
  gap.gap = gap.var_phi - gap.var_psi - gap.var_delta;
  return gap;
}

FalsificationReport shared_arm_test(const CompositeDataset& ds, const NuisanceSet& ns) {
  const int shared = ds.coding.require_shared();
  const ContrastEstimate delta = estimate_delta(ds, ns, Method::aw1);
  const InferenceResult inf = if_variance(delta, ds.rows());

  FalsificationReport report;
  report.delta_hat = delta.value;
  report.se = inf.se;
  if (inf.se > 0.0) {
    report.z = delta.value / inf.se;
    report.p_value = normal_two_sided_p(report.z);
  } else {
    report.z = 0.0;
    report.p_value = delta.value == 0.0 ? 1.0 : 0.0;
  }

  // standardized gap between the two shared-arm outcome models over the
  // index population's covariates
  const Eigen::VectorXd& g_index = ns.outcome_for(Cell{1, shared});
  const Eigen::VectorXd& g_external = ns.outcome_for(Cell{0, shared});
  const std::vector<Eigen::Index> index_rows = stratify(ds, 1);
  double gap_sum = 0.0;
  for (Eigen::Index i : index_rows) gap_sum += g_index[i] - g_external[i];
  const double gap_mean = gap_sum / static_cast<double>(index_rows.size());

  const std::vector<Eigen::Index> cell_index = stratify(ds, 1, shared);
  const std::vector<Eigen::Index> cell_external = stratify(ds, 0, shared);
  auto cell_outcomes = [&](const std::vector<Eigen::Index>& rows) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) v[static_cast<Eigen::Index>(r)] = ds.outcome[rows[r]];
    return v;
  };
  const Eigen::VectorXd ya = cell_outcomes(cell_index);
  const Eigen::VectorXd yb = cell_outcomes(cell_external);
  const double na = static_cast<double>(ya.size());
  const double nb = static_cast<double>(yb.size());
  double pooled_sd;
  if (na + nb > 2.0) {
    pooled_sd = std::sqrt(((na - 1.0) * sample_variance(ya) + (nb - 1.0) * sample_variance(yb)) /
                          (na + nb - 2.0));
  } else {
    pooled_sd = sample_sd(ds.outcome);
  }
  report.standardized_prediction_gap = pooled_sd > 0.0 ? gap_mean / pooled_sd : 0.0;
  return report;
}

}  // namespace excomp
