#ifndef EXCOMP_INFERENCE_HPP
#define EXCOMP_INFERENCE_HPP

#include <cstdint>
#include <string>

#include "estimators.hpp"

namespace excomp {

struct InferenceResult {
  double point = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double level = 0.95;
  std::string method;  // "if-plugin" or "bootstrap-percentile"
  long resamples = 0;  // bootstrap only
  std::uint64_t seed = 0;
  long dropped = 0;  // non-convergent resamples that were discarded
};

// Wald interval from the estimator's centered influence contributions.
InferenceResult if_variance(const ContrastEstimate& estimate, Eigen::Index n, double level = 0.95);

// Nonparametric bootstrap, resampling within each source so the two sample
// sizes stay fixed. Every nuisance model is refit per resample. Percentile
// interval uses type-7 quantiles; deterministic given the seed and invariant
// to the thread count.
InferenceResult bootstrap_ci(const CompositeDataset& ds, const EstimationConfig& config,
                             Estimand estimand, Method method, Scale scale, long resamples,
                             std::uint64_t seed, double level = 0.95, int threads = 1);

// One bootstrap pass covering several estimand/method pairs at once; each
// pair gets exactly the interval bootstrap_ci would produce for the same
// seed, because resamples and fits are shared.
struct BootstrapBatchEntry {
  Estimand estimand = Estimand::psi;
  Method method = Method::om;
  InferenceResult inference;
};

std::vector<BootstrapBatchEntry> bootstrap_batch(const CompositeDataset& ds,
                                                 const EstimationConfig& config,
                                                 const std::vector<Estimand>& estimands,
                                                 const std::vector<Method>& methods, Scale scale,
                                                 long resamples, std::uint64_t seed,
                                                 double level = 0.95, int threads = 1);

// Plug-in asymptotic variances of the aw1 contrasts on one nuisance fit.
// gap = var_phi - var_psi - var_delta; it equals -2 cov(psi, delta)
// identically because the phi contributions decompose as psi - delta.
struct EfficiencyGap {
  double var_phi = 0.0;
  double var_psi = 0.0;
  double var_delta = 0.0;
  double gap = 0.0;
  double cov_psi_delta = 0.0;
};

EfficiencyGap efficiency_gap(const CompositeDataset& ds, const NuisanceSet& ns);

// Falsification check of equal shared-arm outcome means across sources.
struct FalsificationReport {
  double delta_hat = 0.0;
  double se = 0.0;
  double z = 0.0;
  double p_value = 1.0;
  // mean over index rows of the two shared-arm outcome predictions' gap,
  // divided by the pooled shared-arm outcome standard deviation
  double standardized_prediction_gap = 0.0;
};

FalsificationReport shared_arm_test(const CompositeDataset& ds, const NuisanceSet& ns);

}  // namespace excomp

#endif  // EXCOMP_INFERENCE_HPP
