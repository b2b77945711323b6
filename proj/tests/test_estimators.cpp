#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "inference.hpp"
#include "rng.hpp"
#include "stats.hpp"

using namespace excomp;

namespace {

const std::vector<Method> kAllMethods = {Method::om,  Method::w1,  Method::w2,
                                         Method::aw1, Method::aw2, Method::aw3};

// mirrored two-source dataset: every index row has an external twin with the
// same covariate and outcome, so cross-source contrasts vanish exactly
CompositeDataset mirror_dataset(bool with_shared_arm, int pairs, std::uint64_t seed) {
  Rng rng(seed);
  const int per_row = with_shared_arm ? 2 : 1;
  const Eigen::Index n = 2 * pairs * per_row;
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXi s(n), a(n);
  Eigen::VectorXd y(n);
  Eigen::Index r = 0;
  for (int i = 0; i < pairs; ++i) {
    const double xi = rng.normal();
    const double y_active = xi + rng.normal();
    x(r, 0) = xi; s[r] = 1; a[r] = 1; y[r] = y_active; ++r;
    x(r, 0) = xi; s[r] = 0; a[r] = 2; y[r] = y_active; ++r;
    if (with_shared_arm) {
      const double xj = rng.normal();
      const double y_shared = -xj + rng.normal();
      x(r, 0) = xj; s[r] = 1; a[r] = 0; y[r] = y_shared; ++r;
      x(r, 0) = xj; s[r] = 0; a[r] = 0; y[r] = y_shared; ++r;
    }
  }
  const TreatmentCoding coding =
      with_shared_arm ? TreatmentCoding::make({0, 1}, {0, 2}, 1, 2, 0)
                      : TreatmentCoding::make({1}, {2}, 1, 2);
  return make_dataset(x, s, a, y, {"x1"}, coding);
}

EstimationConfig gaussian_config(bool with_covariate) {
  EstimationConfig config;
  config.participation.family = Family::bernoulli_logit;
  config.treatment.family = Family::bernoulli_logit;
  config.outcome.family = Family::gaussian_identity;
  if (with_covariate) {
    config.participation.covariates = {"x1"};
    config.treatment.covariates = {"x1"};
    config.outcome.covariates = {"x1"};
  }
  return config;
}

}  // namespace

TEST_CASE("six-row fixture: every method matches the frozen oracle to 1e-10") {
  const CompositeDataset ds = fixture::dataset();
  const NuisanceSet ns = fixture::nuisances();
  for (Method method : kAllMethods) {
    const std::string name = method_name(method);
    const fixture::FrozenRow& expect = fixture::frozen().at(name);
    CAPTURE(name);

    const double g11 = cell_mean(ds, ns, Cell{1, 1}, method).value;
    const double g10 = cell_mean(ds, ns, Cell{1, 0}, method).value;
    const double g02 = cell_mean(ds, ns, Cell{0, 2}, method).value;
    const double g00 = cell_mean(ds, ns, Cell{0, 0}, method).value;
    CHECK(g11 == doctest::Approx(expect.g11).epsilon(1e-10));
    CHECK(g10 == doctest::Approx(expect.g10).epsilon(1e-10));
    CHECK(g02 == doctest::Approx(expect.g02).epsilon(1e-10));
    CHECK(g00 == doctest::Approx(expect.g00).epsilon(1e-10));

    // the independent loop oracle agrees with the frozen constants
    CHECK(fixture::oracle_cell_mean(1, 1, name) == doctest::Approx(expect.g11).epsilon(1e-12));
    CHECK(fixture::oracle_cell_mean(1, 0, name) == doctest::Approx(expect.g10).epsilon(1e-12));
    CHECK(fixture::oracle_cell_mean(0, 2, name) == doctest::Approx(expect.g02).epsilon(1e-12));
    CHECK(fixture::oracle_cell_mean(0, 0, name) == doctest::Approx(expect.g00).epsilon(1e-12));

    CHECK(estimate_psi(ds, ns, method).value == doctest::Approx(expect.psi).epsilon(1e-10));
    CHECK(estimate_phi(ds, ns, method).value == doctest::Approx(expect.phi).epsilon(1e-10));
    CHECK(estimate_delta(ds, ns, method).value == doctest::Approx(expect.delta).epsilon(1e-10));
    CHECK(estimate_lambda(ds, ns, method).value == doctest::Approx(expect.lambda).epsilon(1e-10));
  }
}

TEST_CASE("transport weights: reciprocal, odds form, indicator and guard") {
  const CompositeDataset ds = fixture::dataset();
  const NuisanceSet ns = fixture::nuisances();
  // row 1 sits in cell (1,1) with e=0.25
  CHECK(transport_weight(ds, ns, Cell{1, 1}, 1) == doctest::Approx(4.0));
  // row 5 sits in cell (0,2): p=0.5, e=0.6 -> (0.5/0.5)/0.6
  CHECK(transport_weight(ds, ns, Cell{0, 2}, 5) == doctest::Approx(0.5 / (0.6 * 0.5)));
  // index row requested for an external cell gets weight zero
  CHECK(transport_weight(ds, ns, Cell{0, 2}, 0) == 0.0);

  NuisanceSet degenerate = ns;
  degenerate.treatment[Cell{1, 1}][1] = 1e-15;
  CHECK_THROWS_AS(transport_weight(ds, degenerate, Cell{1, 1}, 1), PositivityViolation);
  NuisanceSet saturated = ns;
  saturated.participation[5] = 1.0;
  CHECK_THROWS_AS(transport_weight(ds, saturated, Cell{0, 2}, 5), PositivityViolation);
}

TEST_CASE("worked aw1 example: two index rows") {
  Eigen::MatrixXd x(2, 1);
  x << 0.0, 0.0;
  Eigen::VectorXi s(2), a(2);
  s << 1, 1;
  a << 1, 0;
  Eigen::VectorXd y(2);
  y << 2.0, 0.0;
  // external row is required by the data model; park one far away
  Eigen::MatrixXd x3(3, 1);
  x3 << 0.0, 0.0, 0.0;
  Eigen::VectorXi s3(3), a3(3);
  s3 << 1, 1, 0;
  a3 << 1, 0, 2;
  Eigen::VectorXd y3(3);
  y3 << 2.0, 0.0, 0.0;
  const CompositeDataset ds =
      make_dataset(x3, s3, a3, y3, {"x1"}, TreatmentCoding::make({0, 1}, {0, 2}, 1, 2, 0));

  NuisanceSet ns;
  ns.index_fraction = 2.0 / 3.0;
  ns.participation = Eigen::VectorXd::Constant(3, 0.5);
  Eigen::VectorXd e11 = Eigen::VectorXd::Constant(3, 0.5);
  Eigen::VectorXd g11(3);
  g11 << 1.0, 4.0, 0.0;
  ns.treatment[Cell{1, 1}] = e11;
  ns.outcome_mean[Cell{1, 1}] = g11;
  ns.outcome_spec.family = Family::gaussian_identity;

  // row 0: g + w(y-g) = 1 + 2(2-1) = 3; row 1: g = 4; mean over n1=2 -> 3.5
  const CellMeanEstimate est = cell_mean(ds, ns, Cell{1, 1}, Method::aw1);
  CHECK(est.value == doctest::Approx(3.5).epsilon(1e-12));
}

TEST_CASE("collapse properties: aw1 reduces to om and w1") {
  const CompositeDataset ds = fixture::dataset();

  // zero residuals: set the outcome model to interpolate the data in-cell
  NuisanceSet exact = fixture::nuisances();
  for (auto& [cell, g] : exact.outcome_mean) {
    for (Eigen::Index i = 0; i < ds.rows(); ++i) {
      if (ds.source[i] == cell.source && ds.arm[i] == cell.arm) g[i] = ds.outcome[i];
    }
  }
  for (const Cell cell : {Cell{1, 1}, Cell{1, 0}, Cell{0, 2}, Cell{0, 0}}) {
    const double aw1 = cell_mean(ds, exact, cell, Method::aw1).value;
    const double om = cell_mean(ds, exact, cell, Method::om).value;
    CHECK(aw1 == doctest::Approx(om).epsilon(1e-12));
  }

  // outcome model identically zero: aw1 equals w1
  NuisanceSet zero = fixture::nuisances();
  for (auto& [cell, g] : zero.outcome_mean) g.setZero();
  for (const Cell cell : {Cell{1, 1}, Cell{1, 0}, Cell{0, 2}, Cell{0, 0}}) {
    const double aw1 = cell_mean(ds, zero, cell, Method::aw1).value;
    const double w1 = cell_mean(ds, zero, cell, Method::w1).value;
    CHECK(aw1 == doctest::Approx(w1).epsilon(1e-12));
  }
}

TEST_CASE("w2 and aw2 are invariant to rescaling all weights") {
  const CompositeDataset ds = fixture::dataset();
  NuisanceSet ns = fixture::nuisances();
  const double w2 = cell_mean(ds, ns, Cell{0, 2}, Method::w2).value;
  const double aw2 = cell_mean(ds, ns, Cell{0, 2}, Method::aw2).value;

  // scaling e_{0,2} by 1/10 scales every weight in the cell by 10
  NuisanceSet scaled = ns;
  scaled.treatment[Cell{0, 2}] /= 10.0;
  CHECK(cell_mean(ds, scaled, Cell{0, 2}, Method::w2).value == doctest::Approx(w2).epsilon(1e-12));
  CHECK(cell_mean(ds, scaled, Cell{0, 2}, Method::aw2).value ==
        doctest::Approx(aw2).epsilon(1e-12));

  // constant outcome in the weighted cell: w2 returns it regardless of weights
  CompositeDataset constant = ds;
  constant.outcome[4] = 7.0;
  constant.outcome[5] = 7.0;
  CHECK(cell_mean(constant, ns, Cell{0, 2}, Method::w2).value == doctest::Approx(7.0));
}

TEST_CASE("aw3: hand-solved weighted least squares on a slope model") {
  Eigen::MatrixXd x(6, 1);
  x << 0, 1, 2, 0, 0, 0;
  Eigen::VectorXi s(6), a(6);
  s << 1, 1, 1, 0, 0, 0;
  a << 1, 1, 1, 2, 2, 2;
  Eigen::VectorXd y(6);
  y << 1, 2, 2, 0, 0, 0;
  const CompositeDataset ds =
      make_dataset(x, s, a, y, {"x1"}, TreatmentCoding::make({1}, {2}, 1, 2));

  NuisanceSet ns;
  ns.index_fraction = 0.5;
  ns.participation = Eigen::VectorXd::Constant(6, 0.5);
  Eigen::VectorXd e11(6);
  e11 << 0.5, 0.25, 0.5, 0.5, 0.5, 0.5;  // weights 2, 4, 2 in the cell
  ns.treatment[Cell{1, 1}] = e11;
  ns.outcome_mean[Cell{1, 1}] = Eigen::VectorXd::Zero(6);
  ns.outcome_spec.family = Family::gaussian_identity;
  ns.outcome_spec.covariates = {"x1"};

  // WLS through (0,1,w2),(1,2,w4),(2,2,w2): intercept 1.25, slope 0.5;
  // average of fitted values over the three index rows = 1.75
  const CellMeanEstimate est = cell_mean(ds, ns, Cell{1, 1}, Method::aw3);
  CHECK(est.value == doctest::Approx(1.75).epsilon(1e-8));
}

TEST_CASE("aw3 equals om under constant weights and satisfies the score identity") {
  const CompositeDataset ds = fixture::dataset();
  NuisanceSet ns = fixture::nuisances();
  ns.outcome_spec.covariates = {};  // intercept-only refit

  // make the (0,2) weights constant: equal e and equal p across the cell
  NuisanceSet flat = ns;
  flat.participation = Eigen::VectorXd::Constant(6, 0.5);
  flat.treatment[Cell{0, 2}] = Eigen::VectorXd::Constant(6, 0.5);
  // constant-weight intercept-only refit is the plain cell mean; om with a
  // matching intercept-only outcome model gives the same value
  NuisanceSet om_ns = flat;
  const std::vector<Eigen::Index> cell_rows = stratify(ds, 0, 2);
  double cell_mean_y = 0.0;
  for (Eigen::Index i : cell_rows) cell_mean_y += ds.outcome[i];
  cell_mean_y /= static_cast<double>(cell_rows.size());
  om_ns.outcome_mean[Cell{0, 2}] = Eigen::VectorXd::Constant(6, cell_mean_y);
  CHECK(cell_mean(ds, flat, Cell{0, 2}, Method::aw3).value ==
        doctest::Approx(cell_mean(ds, om_ns, Cell{0, 2}, Method::om).value).epsilon(1e-12));

  // canonical-link refit with intercept: weighted residuals sum to zero
  NuisanceSet slope = fixture::nuisances();
  slope.outcome_spec.covariates = {};
  const Eigen::VectorXd w = transport_weights(ds, slope, Cell{0, 2});
  const double g_tilde = cell_mean(ds, slope, Cell{0, 2}, Method::aw3).value;
  double weighted_resid = 0.0;
  for (Eigen::Index i = 0; i < ds.rows(); ++i) weighted_resid += w[i] * (ds.outcome[i] - g_tilde);
  CHECK(std::abs(weighted_resid) <= 1e-8);
}

TEST_CASE("aw1 contributions have exact mean zero") {
  const CompositeDataset ds = fixture::dataset();
  const NuisanceSet ns = fixture::nuisances();
  for (const Cell cell : {Cell{1, 1}, Cell{1, 0}, Cell{0, 2}, Cell{0, 0}}) {
    const CellMeanEstimate est = cell_mean(ds, ns, cell, Method::aw1);
    REQUIRE(est.if_contributions.has_value());
    CHECK(std::abs(est.if_contributions->mean()) <= 1e-10);
  }
  for (Estimand estimand : {Estimand::psi, Estimand::phi, Estimand::delta, Estimand::lambda}) {
    const ContrastEstimate est = estimate(ds, ns, estimand, Method::aw1);
    REQUIRE(est.if_contributions.has_value());
    CHECK(std::abs(est.if_contributions->mean()) <= 1e-10);
  }
}

TEST_CASE("assembly identities: psi - phi = delta and the phi four-term form") {
  const CompositeDataset ds = fixture::dataset();
  const NuisanceSet ns = fixture::nuisances();
  for (Method method : kAllMethods) {
    const ContrastEstimate psi = estimate_psi(ds, ns, method);
    const ContrastEstimate phi = estimate_phi(ds, ns, method);
    const ContrastEstimate delta = estimate_delta(ds, ns, method);
    CHECK(psi.value - phi.value == doctest::Approx(delta.value).epsilon(1e-12));

    const double g11 = phi.components.at(cell_label(Cell{1, 1}));
    const double g10 = phi.components.at(cell_label(Cell{1, 0}));
    const double g02 = phi.components.at(cell_label(Cell{0, 2}));
    const double g00 = phi.components.at(cell_label(Cell{0, 0}));
    CHECK(phi.value == g11 - g10 - g02 + g00);  // exact combination
    REQUIRE(phi.comparator_mean.has_value());
    CHECK(*phi.comparator_mean == doctest::Approx(g02 + g10 - g00).epsilon(1e-12));
  }
}

TEST_CASE("psi arithmetic, ratio scale and degenerate ratio") {
  const CompositeDataset ds = fixture::dataset();
  const NuisanceSet ns = fixture::nuisances();
  const ContrastEstimate diff = estimate_psi(ds, ns, Method::om);
  CHECK(diff.value == doctest::Approx(1.25 - 1.5).epsilon(1e-12));
  const ContrastEstimate ratio = estimate_psi(ds, ns, Method::om, Scale::ratio);
  CHECK(ratio.value == doctest::Approx(1.25 / 1.5).epsilon(1e-12));

  NuisanceSet zeroed = ns;
  zeroed.outcome_mean[Cell{0, 2}].setZero();
  CompositeDataset zy = ds;
  zy.outcome[4] = 0.0;
  zy.outcome[5] = 0.0;
  CHECK_THROWS_AS(estimate_psi(zy, zeroed, Method::om, Scale::ratio), DegenerateRatio);
}

TEST_CASE("missing shared arm and empty cells raise") {
  const CompositeDataset no_shared = mirror_dataset(false, 10, 3);
  const EstimationConfig config = gaussian_config(true);
  CHECK_THROWS_AS(run_estimate(no_shared, config, Estimand::phi, Method::om), MissingSharedArm);
  CHECK_THROWS_AS(run_estimate(no_shared, config, Estimand::delta, Method::aw1), MissingSharedArm);
  CHECK_THROWS_AS(cells_for(no_shared.coding, {Estimand::phi}), MissingSharedArm);

  // a coding that allows arm 0 in the index source, with no such rows
  const CompositeDataset ds = fixture::dataset();
  CHECK_THROWS_AS(fit_nuisances(ds, ModelSpec{Family::bernoulli_logit, {}},
                                ModelSpec{Family::bernoulli_logit, {}},
                                ModelSpec{Family::gaussian_identity, {}},
                                {Cell{1, 2}}),
                  ConfigError);  // illegal cell under the coding
  Eigen::MatrixXd x(3, 1);
  x << 0, 0, 0;
  Eigen::VectorXi s(3), a(3);
  s << 1, 1, 0;
  a << 1, 1, 2;
  Eigen::VectorXd y(3);
  y << 1, 2, 3;
  const CompositeDataset sparse =
      make_dataset(x, s, a, y, {"x1"}, TreatmentCoding::make({0, 1}, {0, 2}, 1, 2, 0));
  CHECK_THROWS_AS(fit_nuisances(sparse, ModelSpec{Family::bernoulli_logit, {}},
                                ModelSpec{Family::bernoulli_logit, {}},
                                ModelSpec{Family::gaussian_identity, {}},
                                {Cell{1, 0}}),
                  EmptyCell);
}

TEST_CASE("fit_nuisances intercept-only closed forms") {
  const CompositeDataset ds = fixture::dataset();
  const ModelSpec intercept_logit{Family::bernoulli_logit, {}};
  const ModelSpec intercept_gauss{Family::gaussian_identity, {}};
  const std::vector<Cell> cells = {Cell{1, 1}, Cell{1, 0}, Cell{0, 2}, Cell{0, 0}};
  const NuisanceSet ns = fit_nuisances(ds, intercept_logit, intercept_logit, intercept_gauss, cells);

  CHECK(ns.index_fraction == doctest::Approx(0.5));
  for (Eigen::Index i = 0; i < ds.rows(); ++i) {
    CHECK(ns.participation[i] == doctest::Approx(0.5).epsilon(1e-9));
    // arm shares within each source: index 2/3 vs 1/3, external 1/3 vs 2/3
    CHECK(ns.treatment_for(Cell{1, 1})[i] == doctest::Approx(2.0 / 3).epsilon(1e-8));
    CHECK(ns.treatment_for(Cell{1, 0})[i] == doctest::Approx(1.0 / 3).epsilon(1e-8));
    CHECK(ns.treatment_for(Cell{0, 2})[i] == doctest::Approx(2.0 / 3).epsilon(1e-8));
    CHECK(ns.treatment_for(Cell{0, 0})[i] == doctest::Approx(1.0 / 3).epsilon(1e-8));
    // pairs within a source sum to one
    CHECK(ns.treatment_for(Cell{1, 1})[i] + ns.treatment_for(Cell{1, 0})[i] ==
          doctest::Approx(1.0).epsilon(1e-10));
  }
  CHECK(ns.outcome_for(Cell{1, 1})[0] == doctest::Approx(1.5).epsilon(1e-10));  // mean(2,1)
  CHECK(ns.outcome_for(Cell{0, 2})[3] == doctest::Approx(2.5).epsilon(1e-10));  // mean(3,2)
}

TEST_CASE("fit_nuisances exact outcome fit and prediction at every row") {
  // within cell (1,1) the outcome equals the covariate
  Eigen::MatrixXd x(6, 1);
  x << 0.5, -1, 2, 0, 1, -0.5;
  Eigen::VectorXi s(6), a(6);
  s << 1, 1, 1, 0, 0, 0;
  a << 1, 1, 1, 2, 2, 2;
  Eigen::VectorXd y(6);
  y << 0.5, -1, 2, 9, 9, 9;
  const CompositeDataset ds =
      make_dataset(x, s, a, y, {"x1"}, TreatmentCoding::make({1}, {2}, 1, 2));
  const NuisanceSet ns = fit_nuisances(ds, ModelSpec{Family::bernoulli_logit, {"x1"}},
                                       ModelSpec{Family::bernoulli_logit, {}},
                                       ModelSpec{Family::gaussian_identity, {"x1"}},
                                       {Cell{1, 1}});
  for (Eigen::Index i = 0; i < 6; ++i) {
    CHECK(ns.outcome_for(Cell{1, 1})[i] == doctest::Approx(ds.x(i, 0)).epsilon(1e-9));
  }
  // single-arm sources have unit treatment probability
  for (Eigen::Index i = 0; i < 6; ++i) CHECK(ns.treatment_for(Cell{1, 1})[i] == 1.0);
}

TEST_CASE("known treatment probabilities and truncation") {
  const CompositeDataset ds = fixture::dataset();
  NuisanceOptions options;
  options.known_treatment_probs[Cell{1, 1}] = 0.5;
  options.known_treatment_probs[Cell{1, 0}] = 0.5;
  options.known_treatment_probs[Cell{0, 2}] = 0.5;
  options.known_treatment_probs[Cell{0, 0}] = 0.5;
  const std::vector<Cell> cells = {Cell{1, 1}, Cell{1, 0}, Cell{0, 2}, Cell{0, 0}};
  const NuisanceSet ns =
      fit_nuisances(ds, ModelSpec{Family::bernoulli_logit, {}}, ModelSpec{Family::bernoulli_logit, {}},
                    ModelSpec{Family::gaussian_identity, {}}, cells, options);
  for (const Cell& cell : cells) {
    CHECK(ns.treatment_for(cell)[0] == 0.5);
  }

  NuisanceOptions partial;
  partial.known_treatment_probs[Cell{1, 1}] = 0.5;
  CHECK_THROWS_AS(fit_nuisances(ds, ModelSpec{Family::bernoulli_logit, {}},
                                ModelSpec{Family::bernoulli_logit, {}},
                                ModelSpec{Family::gaussian_identity, {}}, cells, partial),
                  ConfigError);

  NuisanceOptions trunc;
  trunc.truncation = 0.4;
  const NuisanceSet clipped =
      fit_nuisances(ds, ModelSpec{Family::bernoulli_logit, {"x1"}},
                    ModelSpec{Family::bernoulli_logit, {}},
                    ModelSpec{Family::gaussian_identity, {}}, cells, trunc);
  CHECK(clipped.participation.minCoeff() >= 0.4);
  CHECK(clipped.participation.maxCoeff() <= 0.6);
  for (const Cell& cell : cells) {
    CHECK(clipped.treatment_for(cell).minCoeff() >= 0.4);
    CHECK(clipped.treatment_for(cell).maxCoeff() <= 0.6);
  }
}

TEST_CASE("mirrored datasets put every cross-source contrast at zero") {
  const CompositeDataset ds = mirror_dataset(true, 30, 11);
  const EstimationConfig config = gaussian_config(true);
  const std::vector<Cell> cells = cells_for(ds.coding, {Estimand::psi, Estimand::phi});
  const NuisanceSet ns = fit_nuisances(ds, config.participation, config.treatment, config.outcome,
                                       cells, config.nuisance_options);
  for (Method method : kAllMethods) {
    CAPTURE(method_name(method));
    CHECK(std::abs(estimate_psi(ds, ns, method).value) <= 1e-10);
    CHECK(std::abs(estimate_delta(ds, ns, method).value) <= 1e-10);
    CHECK(std::abs(estimate_phi(ds, ns, method).value - estimate_psi(ds, ns, method).value) <=
          1e-10);
  }
}

TEST_CASE("six-row fixture with fitted intercept-only nuisances matches closed forms") {
  // with every model intercept-only, each method collapses to differences of
  // raw cell means: psi = mean(2,1) - mean(3,2) = -1, delta = 0.5 - 1.5 = -1
  const CompositeDataset ds = fixture::dataset();
  const EstimationConfig config = gaussian_config(false);
  const std::vector<Cell> cells = cells_for(ds.coding, {Estimand::psi, Estimand::phi});
  const NuisanceSet ns = fit_nuisances(ds, config.participation, config.treatment, config.outcome,
                                       cells, config.nuisance_options);
  for (Method method : kAllMethods) {
    CAPTURE(method_name(method));
    CHECK(estimate_psi(ds, ns, method).value == doctest::Approx(-1.0).epsilon(1e-8));
    CHECK(estimate_delta(ds, ns, method).value == doctest::Approx(-1.0).epsilon(1e-8));
    CHECK(estimate_phi(ds, ns, method).value == doctest::Approx(0.0).epsilon(1e-8));
  }
}
