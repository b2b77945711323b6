#ifndef EXCOMP_ESTIMATORS_HPP
#define EXCOMP_ESTIMATORS_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "glm.hpp"
#include "tabular.hpp"

namespace excomp {

enum class Method { om, w1, w2, aw1, aw2, aw3 };
enum class Estimand { psi, phi, delta, lambda };
enum class Scale { difference, ratio };

std::string method_name(Method m);
Method method_from_name(const std::string& name);
std::string estimand_name(Estimand e);
Estimand estimand_from_name(const std::string& name);

// A (source, arm) stratum of the composite dataset.
struct Cell {
  int source = 0;
  int arm = 0;
  friend bool operator<(const Cell& a, const Cell& b) {
    return a.source != b.source ? a.source < b.source : a.arm < b.arm;
  }
  friend bool operator==(const Cell& a, const Cell& b) = default;
};

std::string cell_label(const Cell& cell);

struct NuisanceOptions {
  // clip participation and treatment probabilities into [eps, 1-eps]; 0 = off
  double truncation = 0.0;
  // fixed randomization probabilities replacing the fitted treatment model
  std::map<Cell, double> known_treatment_probs;
};

struct GlmDiagnostics {
  bool converged = false;
  int iterations = 0;
  double max_abs_score = 0.0;
};

// Fitted nuisance values evaluated at every observation, regardless of the
// observation's own (source, arm). Immutable once built.
struct NuisanceSet {
  double index_fraction = 0.0;                  // share of rows from the index trial
  Eigen::VectorXd participation;                // P(S=1 | X) per row
  std::map<Cell, Eigen::VectorXd> treatment;    // P(A=a | X, S=s) per row
  std::map<Cell, Eigen::VectorXd> outcome_mean; // E[Y | X, S=s, A=a] per row
  ModelSpec participation_spec, treatment_spec, outcome_spec;
  NuisanceOptions options;
  std::map<std::string, GlmDiagnostics> fits;

  const Eigen::VectorXd& treatment_for(const Cell& cell) const;
  const Eigen::VectorXd& outcome_for(const Cell& cell) const;
};

// Fits the participation model on all rows, a treatment model within each
// source (binary logistic for two arms, multinomial for more, constant for a
// single-arm source), and an outcome model within each requested cell.
NuisanceSet fit_nuisances(const CompositeDataset& ds, const ModelSpec& participation_spec,
                          const ModelSpec& treatment_spec, const ModelSpec& outcome_spec,
                          const std::vector<Cell>& cells, const NuisanceOptions& options = {});

// Inverse-probability transport weight for row i toward cell (s, a):
// index cells use 1/e, external cells the participation odds over e.
double transport_weight(const CompositeDataset& ds, const NuisanceSet& ns, const Cell& cell,
                        Eigen::Index i);
Eigen::VectorXd transport_weights(const CompositeDataset& ds, const NuisanceSet& ns,
                                  const Cell& cell);

// Cell outcome mean standardized to the index population's covariates.
struct CellMeanEstimate {
  Cell cell;
  Method method = Method::om;
  double value = 0.0;
  // centered per-observation influence contributions (aw1 only); mean zero
  std::optional<Eigen::VectorXd> if_contributions;
};

CellMeanEstimate cell_mean(const CompositeDataset& ds, const NuisanceSet& ns, const Cell& cell,
                           Method method);

struct ContrastEstimate {
  Estimand estimand = Estimand::psi;
  Scale scale = Scale::difference;
  Method method = Method::om;
  double value = 0.0;
  std::optional<Eigen::VectorXd> if_contributions;  // aw1 only
  std::optional<int> shared_arm;
  std::optional<double> comparator_mean;  // the implied comparator mean, reported with phi
  std::map<std::string, double> components;  // standardized cell means by label
};

ContrastEstimate estimate_psi(const CompositeDataset& ds, const NuisanceSet& ns, Method method,
                              Scale scale = Scale::difference);
ContrastEstimate estimate_phi(const CompositeDataset& ds, const NuisanceSet& ns, Method method);
ContrastEstimate estimate_delta(const CompositeDataset& ds, const NuisanceSet& ns, Method method);
ContrastEstimate estimate_lambda(const CompositeDataset& ds, const NuisanceSet& ns, Method method);
ContrastEstimate estimate(const CompositeDataset& ds, const NuisanceSet& ns, Estimand estimand,
                          Method method, Scale scale = Scale::difference);

// Cells a set of estimands needs under the dataset's coding.
std::vector<Cell> cells_for(const TreatmentCoding& coding, const std::vector<Estimand>& estimands);

// Model configuration for a full estimation pass; what a bootstrap resample
// re-runs from scratch.
struct EstimationConfig {
  ModelSpec participation, treatment, outcome;
  NuisanceOptions nuisance_options;
};

// Fit nuisances for exactly the cells the estimand needs, then assemble it.
ContrastEstimate run_estimate(const CompositeDataset& ds, const EstimationConfig& config,
                              Estimand estimand, Method method, Scale scale = Scale::difference);

}  // namespace excomp

#endif  // EXCOMP_ESTIMATORS_HPP
