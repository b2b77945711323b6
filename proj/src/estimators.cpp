#include "estimators.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "stats.hpp"

namespace excomp {

namespace {

constexpr double kPositivityFloor = 1e-12;

Eigen::VectorXd clip_probs(Eigen::VectorXd v, double eps) {
  if (eps <= 0.0) return v;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    v[i] = std::min(std::max(v[i], eps), 1.0 - eps);
  }
  return v;
}

Eigen::MatrixXd subset_rows(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(rows[r]);
  return out;
}

Eigen::VectorXd subset(const Eigen::VectorXd& v, const std::vector<Eigen::Index>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) out[static_cast<Eigen::Index>(r)] = v[rows[r]];
  return out;
}

GlmDiagnostics diagnostics_of(const FittedGlm& fit) {
  return GlmDiagnostics{fit.converged, fit.iterations, fit.max_abs_score};
}

// Outcome model fitted within one cell, evaluated at all rows.
Eigen::VectorXd fit_cell_outcome(const CompositeDataset& ds, const ModelSpec& spec,
                                 const Cell& cell, const Eigen::VectorXd* weights,
                                 NuisanceSet* record) {
  const std::vector<Eigen::Index> rows = stratify(ds, cell.source, cell.arm);
  if (rows.empty()) {
    throw EmptyCell("cell " + cell_label(cell) + " has no observations");
  }
  const Eigen::MatrixXd design = design_matrix(ds, spec.covariates);
  const Eigen::MatrixXd cell_design = subset_rows(design, rows);
  const Eigen::VectorXd cell_y = subset(ds.outcome, rows);
  FittedGlm fit;
  try {
    if (weights) {
      const Eigen::VectorXd cell_w = subset(*weights, rows);
      fit = fit_glm(spec.family, cell_design, cell_y, &cell_w);
    } else {
      fit = fit_glm(spec.family, cell_design, cell_y, nullptr);
    }
  } catch (const Error& e) {
    throw Error(e.category(), e.kind(),
                std::string(e.what()) + " [outcome model, cell " + cell_label(cell) + "]");
  }
  if (record) record->fits["outcome " + cell_label(cell)] = diagnostics_of(fit);
  return predict_mean(fit, design);
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::om: return "OM";
    case Method::w1: return "W1";
    case Method::w2: return "W2";
    case Method::aw1: return "AW1";
    case Method::aw2: return "AW2";
    case Method::aw3: return "AW3";
  }
  return "?";
}

Method method_from_name(const std::string& name) {
  if (name == "OM") return Method::om;
  if (name == "W1") return Method::w1;
  if (name == "W2") return Method::w2;
  if (name == "AW1") return Method::aw1;
  if (name == "AW2") return Method::aw2;
  if (name == "AW3") return Method::aw3;
  throw ConfigError("unknown estimator method '" + name + "'");
}

std::string estimand_name(Estimand e) {
  switch (e) {
    case Estimand::psi: return "psi";
    case Estimand::phi: return "phi";
    case Estimand::delta: return "delta";
    case Estimand::lambda: return "lambda";
  }
  return "?";
}

Estimand estimand_from_name(const std::string& name) {
  if (name == "psi") return Estimand::psi;
  if (name == "phi") return Estimand::phi;
  if (name == "delta") return Estimand::delta;
  if (name == "lambda") return Estimand::lambda;
  throw ConfigError("unknown estimand '" + name + "'");
}

std::string cell_label(const Cell& cell) {
  return "(s=" + std::to_string(cell.source) + ", a=" + std::to_string(cell.arm) + ")";
}

const Eigen::VectorXd& NuisanceSet::treatment_for(const Cell& cell) const {
  const auto it = treatment.find(cell);
  if (it == treatment.end()) {
    throw EmptyCell("no fitted treatment probabilities for cell " + cell_label(cell));
  }
  return it->second;
}

const Eigen::VectorXd& NuisanceSet::outcome_for(const Cell& cell) const {
  const auto it = outcome_mean.find(cell);
  if (it == outcome_mean.end()) {
    throw EmptyCell("no fitted outcome means for cell " + cell_label(cell));
  }
  return it->second;
}

NuisanceSet fit_nuisances(const CompositeDataset& ds, const ModelSpec& participation_spec,
                          const ModelSpec& treatment_spec, const ModelSpec& outcome_spec,
                          const std::vector<Cell>& cells, const NuisanceOptions& options) {
  if (options.truncation < 0.0 || options.truncation >= 0.5) {
    throw ConfigError("truncation bound must lie in [0, 0.5)");
  }
  NuisanceSet ns;
  ns.participation_spec = participation_spec;
  ns.treatment_spec = treatment_spec;
  ns.outcome_spec = outcome_spec;
  ns.options = options;
  const Eigen::Index n = ds.rows();
  ns.index_fraction = static_cast<double>(ds.n_index) / static_cast<double>(n);

  for (const Cell& cell : cells) {
    if (!ds.coding.legal(cell.source, cell.arm)) {
      throw ConfigError("requested cell " + cell_label(cell) + " is not legal under the coding");
    }
    if (stratify(ds, cell.source, cell.arm).empty()) {
      throw EmptyCell("requested cell " + cell_label(cell) + " has no observations");
    }
  }

  // participation: one logistic fit on the full dataset, response S
  {
    const Eigen::MatrixXd design = design_matrix(ds, participation_spec.covariates);
    const Eigen::VectorXd response = ds.source.cast<double>();
    FittedGlm fit;
    try {
      fit = fit_glm(Family::bernoulli_logit, design, response);
    } catch (const Error& e) {
      throw Error(e.category(), e.kind(), std::string(e.what()) + " [participation model]");
    }
    ns.fits["participation"] = diagnostics_of(fit);
    ns.participation = clip_probs(predict_mean(fit, design), options.truncation);
  }

  // treatment: one model per source over the arms observed in that source
  std::set<int> sources_needed;
  for (const Cell& cell : cells) sources_needed.insert(cell.source);
  for (int s : sources_needed) {
    std::vector<Cell> source_cells;
    for (const Cell& cell : cells) {
      if (cell.source == s) source_cells.push_back(cell);
    }
    if (!options.known_treatment_probs.empty()) {
      for (const Cell& cell : source_cells) {
        const auto it = options.known_treatment_probs.find(cell);
        if (it == options.known_treatment_probs.end()) {
          throw ConfigError("known treatment probabilities do not cover cell " + cell_label(cell));
        }
        if (!(it->second > 0.0 && it->second < 1.0)) {
          throw ConfigError("known treatment probability for cell " + cell_label(cell) +
                            " must lie in (0,1)");
        }
        ns.treatment[cell] = Eigen::VectorXd::Constant(n, it->second);
      }
      continue;
    }

    const std::vector<Eigen::Index> rows = stratify(ds, s);
    std::set<int> observed;
    for (Eigen::Index i : rows) observed.insert(ds.arm[i]);
    const std::vector<int> codes(observed.begin(), observed.end());

    if (codes.size() == 1) {
      // single-arm source: assignment is deterministic
      ns.treatment[Cell{s, codes[0]}] = Eigen::VectorXd::Ones(n);
    } else {
      const Eigen::MatrixXd design = design_matrix(ds, treatment_spec.covariates);
      const Eigen::MatrixXd source_design = subset_rows(design, rows);
      Eigen::VectorXd response(static_cast<Eigen::Index>(rows.size()));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const int code = ds.arm[rows[r]];
        const auto pos = std::lower_bound(codes.begin(), codes.end(), code);
        response[static_cast<Eigen::Index>(r)] = static_cast<double>(pos - codes.begin());
      }
      try {
        if (codes.size() == 2) {
          const FittedGlm fit = fit_glm(Family::bernoulli_logit, source_design, response);
          ns.fits["treatment s=" + std::to_string(s)] = diagnostics_of(fit);
          const Eigen::VectorXd p_high = predict_mean(fit, design);
          ns.treatment[Cell{s, codes[1]}] = p_high;
          ns.treatment[Cell{s, codes[0]}] = Eigen::VectorXd::Ones(n) - p_high;
        } else {
          const FittedGlm fit = fit_glm(Family::multinomial_logit, source_design, response, nullptr,
                                        FitOptions{}, static_cast<int>(codes.size()));
          ns.fits["treatment s=" + std::to_string(s)] = diagnostics_of(fit);
          const Eigen::MatrixXd probs = predict_class_probs(fit, design);
          for (std::size_t c = 0; c < codes.size(); ++c) {
            ns.treatment[Cell{s, codes[c]}] = probs.col(static_cast<Eigen::Index>(c));
          }
        }
      } catch (const Error& e) {
        throw Error(e.category(), e.kind(),
                    std::string(e.what()) + " [treatment model, source " + std::to_string(s) + "]");
      }
    }
  }
  if (options.truncation > 0.0) {
    for (auto& [cell, probs] : ns.treatment) probs = clip_probs(std::move(probs), options.truncation);
  }

  // outcome means: one model per requested cell, evaluated everywhere
  for (const Cell& cell : cells) {
    ns.outcome_mean[cell] = fit_cell_outcome(ds, outcome_spec, cell, nullptr, &ns);
  }
  return ns;
}

double transport_weight(const CompositeDataset& ds, const NuisanceSet& ns, const Cell& cell,
                        Eigen::Index i) {
  if (ds.source[i] != cell.source || ds.arm[i] != cell.arm) return 0.0;
  const double e = ns.treatment_for(cell)[i];
  if (cell.source == 1) {
    if (e <= kPositivityFloor) {
      throw PositivityViolation("row " + std::to_string(i) + ": treatment probability for cell " +
                                cell_label(cell) + " is numerically zero");
    }
    return 1.0 / e;
  }
  const double p = ns.participation[i];
  if (e <= kPositivityFloor || 1.0 - p <= kPositivityFloor) {
    throw PositivityViolation("row " + std::to_string(i) +
                              ": transport weight denominator for cell " + cell_label(cell) +
                              " is numerically zero");
  }
  return p / (e * (1.0 - p));
}

Eigen::VectorXd transport_weights(const CompositeDataset& ds, const NuisanceSet& ns,
                                  const Cell& cell) {
  Eigen::VectorXd w(ds.rows());
  for (Eigen::Index i = 0; i < ds.rows(); ++i) w[i] = transport_weight(ds, ns, cell, i);
  return w;
}

CellMeanEstimate cell_mean(const CompositeDataset& ds, const NuisanceSet& ns, const Cell& cell,
                           Method method) {
  const Eigen::Index n = ds.rows();
  const double n1 = static_cast<double>(ds.n_index);
  const Eigen::VectorXd& g = ns.outcome_for(cell);
  CellMeanEstimate est;
  est.cell = cell;
  est.method = method;

  const Eigen::VectorXd index_mask =
      (ds.source.array() == 1).cast<double>().matrix();

  switch (method) {
    case Method::om: {
      est.value = index_mask.dot(g) / n1;
      return est;
    }
    case Method::w1: {
      const Eigen::VectorXd w = transport_weights(ds, ns, cell);
      est.value = w.dot(ds.outcome) / n1;
      return est;
    }
    case Method::w2: {
      const Eigen::VectorXd w = transport_weights(ds, ns, cell);
      const double mass = w.sum();
      if (mass <= 0.0) {
        throw ZeroWeightMass("total transport weight for cell " + cell_label(cell) + " is zero");
      }
      est.value = w.dot(ds.outcome) / mass;
      return est;
    }
    case Method::aw1: {
      const Eigen::VectorXd w = transport_weights(ds, ns, cell);
      const Eigen::VectorXd resid = ds.outcome - g;
      est.value = (index_mask.dot(g) + w.dot(resid)) / n1;
      // plug-in influence contributions (1/zeta){I(S=1)(g - gamma) + w * resid};
      // centering at the estimate itself makes their mean exactly zero
      Eigen::VectorXd contrib(n);
      const double inv_zeta = static_cast<double>(n) / n1;
      for (Eigen::Index i = 0; i < n; ++i) {
        contrib[i] = inv_zeta * (index_mask[i] * (g[i] - est.value) + w[i] * resid[i]);
      }
      est.if_contributions = std::move(contrib);
      return est;
    }
    case Method::aw2: {
      const Eigen::VectorXd w = transport_weights(ds, ns, cell);
      const double mass = w.sum();
      if (mass <= 0.0) {
        throw ZeroWeightMass("total transport weight for cell " + cell_label(cell) + " is zero");
      }
      const Eigen::VectorXd resid = ds.outcome - g;
      est.value = index_mask.dot(g) / n1 + w.dot(resid) / mass;
      return est;
    }
    case Method::aw3: {
      const Eigen::VectorXd w = transport_weights(ds, ns, cell);
      // refit the outcome model inside the cell with the transport weights
      Eigen::VectorXd refit = fit_cell_outcome(ds, ns.outcome_spec, cell, &w, nullptr);
      est.value = index_mask.dot(refit) / n1;
      return est;
    }
  }
  throw InvalidInput("unknown method");
}

namespace {

ContrastEstimate combine(const CompositeDataset& ds, Estimand estimand, Method method, Scale scale,
                         const std::vector<std::pair<double, CellMeanEstimate>>& terms) {
  ContrastEstimate est;
  est.estimand = estimand;
  est.scale = scale;
  est.method = method;
  double value = 0.0;
  for (const auto& [sign, term] : terms) {
    value += sign * term.value;
    est.components[cell_label(term.cell)] = term.value;
  }
  est.value = value;
  if (method == Method::aw1) {
    Eigen::VectorXd contrib = Eigen::VectorXd::Zero(ds.rows());
    for (const auto& [sign, term] : terms) contrib += sign * *term.if_contributions;
    est.if_contributions = std::move(contrib);
  }
  return est;
}

}  // namespace

ContrastEstimate estimate_psi(const CompositeDataset& ds, const NuisanceSet& ns, Method method,
                              Scale scale) {
  const Cell index_cell{1, ds.coding.index_only};
  const Cell external_cell{0, ds.coding.external_only};
  const CellMeanEstimate g11 = cell_mean(ds, ns, index_cell, method);
  const CellMeanEstimate g02 = cell_mean(ds, ns, external_cell, method);
  if (scale == Scale::difference) {
    return combine(ds, Estimand::psi, method, scale, {{1.0, g11}, {-1.0, g02}});
  }
  if (std::abs(g02.value) <= 1e-12) {
    throw DegenerateRatio("ratio-scale contrast: the comparator mean is numerically zero");
  }
  ContrastEstimate est;
  est.estimand = Estimand::psi;
  est.scale = Scale::ratio;
  est.method = method;
  est.value = g11.value / g02.value;
  est.components[cell_label(index_cell)] = g11.value;
  est.components[cell_label(external_cell)] = g02.value;
  if (method == Method::aw1) {
    // delta-method contributions for the ratio
    est.if_contributions =
        ((*g11.if_contributions - est.value * *g02.if_contributions) / g02.value).eval();
  }
  return est;
}

ContrastEstimate estimate_phi(const CompositeDataset& ds, const NuisanceSet& ns, Method method) {
  const int shared = ds.coding.require_shared();
  const CellMeanEstimate g11 = cell_mean(ds, ns, Cell{1, ds.coding.index_only}, method);
  const CellMeanEstimate g10 = cell_mean(ds, ns, Cell{1, shared}, method);
  const CellMeanEstimate g02 = cell_mean(ds, ns, Cell{0, ds.coding.external_only}, method);
  const CellMeanEstimate g00 = cell_mean(ds, ns, Cell{0, shared}, method);
  ContrastEstimate est = combine(ds, Estimand::phi, method, Scale::difference,
                                 {{1.0, g11}, {-1.0, g10}, {-1.0, g02}, {1.0, g00}});
  est.shared_arm = shared;
  est.comparator_mean = g02.value + g10.value - g00.value;
  return est;
}

ContrastEstimate estimate_delta(const CompositeDataset& ds, const NuisanceSet& ns, Method method) {
  const int shared = ds.coding.require_shared();
  const CellMeanEstimate g10 = cell_mean(ds, ns, Cell{1, shared}, method);
  const CellMeanEstimate g00 = cell_mean(ds, ns, Cell{0, shared}, method);
  ContrastEstimate est =
      combine(ds, Estimand::delta, method, Scale::difference, {{1.0, g10}, {-1.0, g00}});
  est.shared_arm = shared;
  return est;
}

ContrastEstimate estimate_lambda(const CompositeDataset& ds, const NuisanceSet& ns, Method method) {
  const int shared = ds.coding.require_shared();
  const CellMeanEstimate g02 = cell_mean(ds, ns, Cell{0, ds.coding.external_only}, method);
  const CellMeanEstimate g10 = cell_mean(ds, ns, Cell{1, shared}, method);
  const CellMeanEstimate g00 = cell_mean(ds, ns, Cell{0, shared}, method);
  ContrastEstimate est = combine(ds, Estimand::lambda, method, Scale::difference,
                                 {{1.0, g02}, {1.0, g10}, {-1.0, g00}});
  est.shared_arm = shared;
  return est;
}

ContrastEstimate estimate(const CompositeDataset& ds, const NuisanceSet& ns, Estimand estimand,
                          Method method, Scale scale) {
  switch (estimand) {
    case Estimand::psi: return estimate_psi(ds, ns, method, scale);
    case Estimand::phi: return estimate_phi(ds, ns, method);
    case Estimand::delta: return estimate_delta(ds, ns, method);
    case Estimand::lambda: return estimate_lambda(ds, ns, method);
  }
  throw InvalidInput("unknown estimand");
}

std::vector<Cell> cells_for(const TreatmentCoding& coding, const std::vector<Estimand>& estimands) {
  std::set<Cell> cells;
  for (Estimand e : estimands) {
    switch (e) {
      case Estimand::psi:
        cells.insert(Cell{1, coding.index_only});
        cells.insert(Cell{0, coding.external_only});
        break;
      case Estimand::phi:
      case Estimand::lambda:
        cells.insert(Cell{1, coding.index_only});
        cells.insert(Cell{0, coding.external_only});
        cells.insert(Cell{1, coding.require_shared()});
        cells.insert(Cell{0, coding.require_shared()});
        break;
      case Estimand::delta:
        cells.insert(Cell{1, coding.require_shared()});
        cells.insert(Cell{0, coding.require_shared()});
        break;
    }
  }
  return {cells.begin(), cells.end()};
}

ContrastEstimate run_estimate(const CompositeDataset& ds, const EstimationConfig& config,
                              Estimand estimand, Method method, Scale scale) {
  const std::vector<Cell> cells = cells_for(ds.coding, {estimand});
  const NuisanceSet ns = fit_nuisances(ds, config.participation, config.treatment, config.outcome,
                                       cells, config.nuisance_options);
  return estimate(ds, ns, estimand, method, scale);
}

}  // namespace excomp
