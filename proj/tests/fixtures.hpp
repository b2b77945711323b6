// Shared test fixture: a six-row composite dataset with hand-specified
// nuisance values, plus an independent plain-loop oracle for every cell-mean
// method. The frozen constants were derived with exact rational arithmetic.
#ifndef EXCOMP_TESTS_FIXTURES_HPP
#define EXCOMP_TESTS_FIXTURES_HPP

#include <array>
#include <map>
#include <string>

#include "estimators.hpp"
#include "tabular.hpp"

namespace fixture {

// rows: (s, a, x1, y)
inline constexpr int kRows = 6;
inline constexpr std::array<int, kRows> kS = {1, 1, 1, 0, 0, 0};
inline constexpr std::array<int, kRows> kA = {1, 1, 0, 0, 2, 2};
inline constexpr std::array<double, kRows> kX = {0.5, -1.0, 2.0, 0.0, 1.0, -0.5};
inline constexpr std::array<double, kRows> kY = {2.0, 1.0, 0.5, 1.5, 3.0, 2.0};

// hand-specified nuisance values per row
inline constexpr std::array<double, kRows> kP = {0.6, 0.5, 0.7, 0.4, 0.3, 0.5};
inline constexpr std::array<double, kRows> kE11 = {0.5, 0.25, 0.5, 0.5, 0.6, 0.5};
inline constexpr std::array<double, kRows> kE10 = {0.5, 0.75, 0.6, 0.5, 0.4, 0.5};
inline constexpr std::array<double, kRows> kE02 = {0.25, 0.5, 0.2, 0.4, 0.5, 0.6};
inline constexpr std::array<double, kRows> kE00 = {0.75, 0.5, 0.8, 0.6, 0.5, 0.4};

// hand-specified outcome models, linear in x1
inline double g11(double x) { return 1.0 + 0.5 * x; }
inline double g10(double x) { return 0.5 + 0.25 * x; }
inline double g02(double x) { return 2.0 - x; }
inline double g00(double x) { return 1.0 + x; }

inline excomp::TreatmentCoding coding() {
  return excomp::TreatmentCoding::make({0, 1}, {0, 2}, 1, 2, 0);
}

inline excomp::CompositeDataset dataset() {
  Eigen::MatrixXd x(kRows, 1);
  Eigen::VectorXi s(kRows), a(kRows);
  Eigen::VectorXd y(kRows);
  for (int i = 0; i < kRows; ++i) {
    x(i, 0) = kX[i];
    s[i] = kS[i];
    a[i] = kA[i];
    y[i] = kY[i];
  }
  return excomp::make_dataset(x, s, a, y, {"x1"}, coding());
}

// NuisanceSet carrying the hand values; the outcome spec is intercept-only
// gaussian so the AW3 refit has a closed form (the weighted cell mean).
inline excomp::NuisanceSet nuisances() {
  using excomp::Cell;
  excomp::NuisanceSet ns;
  ns.index_fraction = 0.5;
  ns.participation = Eigen::VectorXd(kRows);
  Eigen::VectorXd e11(kRows), e10(kRows), e02(kRows), e00(kRows);
  Eigen::VectorXd m11(kRows), m10(kRows), m02(kRows), m00(kRows);
  for (int i = 0; i < kRows; ++i) {
    ns.participation[i] = kP[i];
    e11[i] = kE11[i];
    e10[i] = kE10[i];
    e02[i] = kE02[i];
    e00[i] = kE00[i];
    m11[i] = g11(kX[i]);
    m10[i] = g10(kX[i]);
    m02[i] = g02(kX[i]);
    m00[i] = g00(kX[i]);
  }
  ns.treatment[Cell{1, 1}] = e11;
  ns.treatment[Cell{1, 0}] = e10;
  ns.treatment[Cell{0, 2}] = e02;
  ns.treatment[Cell{0, 0}] = e00;
  ns.outcome_mean[Cell{1, 1}] = m11;
  ns.outcome_mean[Cell{1, 0}] = m10;
  ns.outcome_mean[Cell{0, 2}] = m02;
  ns.outcome_mean[Cell{0, 0}] = m00;
  ns.outcome_spec.family = excomp::Family::gaussian_identity;
  return ns;
}

// Independent oracle: plain loops over the raw arrays, no shared code with
// the estimators. AW3 with the intercept-only refit equals the weighted cell
// mean, which is also the W2 value.
struct OracleTables {
  const std::array<double, kRows>* e = nullptr;
  double (*g)(double) = nullptr;
};

inline OracleTables tables(int s, int a) {
  if (s == 1 && a == 1) return {&kE11, &g11};
  if (s == 1 && a == 0) return {&kE10, &g10};
  if (s == 0 && a == 2) return {&kE02, &g02};
  return {&kE00, &g00};
}

inline double oracle_weight(int s, int a, int i) {
  const OracleTables t = tables(s, a);
  if (kS[i] != s || kA[i] != a) return 0.0;
  if (s == 1) return 1.0 / (*t.e)[i];
  return kP[i] / ((*t.e)[i] * (1.0 - kP[i]));
}

inline double oracle_cell_mean(int s, int a, const std::string& method) {
  const OracleTables t = tables(s, a);
  const int n1 = 3;
  double sum_g_index = 0.0, sum_wy = 0.0, sum_w = 0.0, sum_wr = 0.0;
  for (int i = 0; i < kRows; ++i) {
    const double g = t.g(kX[i]);
    const double w = oracle_weight(s, a, i);
    if (kS[i] == 1) sum_g_index += g;
    sum_wy += w * kY[i];
    sum_w += w;
    sum_wr += w * (kY[i] - g);
  }
  if (method == "OM") return sum_g_index / n1;
  if (method == "W1") return sum_wy / n1;
  if (method == "W2" || method == "AW3") return sum_wy / sum_w;
  if (method == "AW1") return (sum_g_index + sum_wr) / n1;
  if (method == "AW2") return sum_g_index / n1 + sum_wr / sum_w;
  return 0.0;
}

// frozen expected values (exact rationals evaluated as doubles)
struct FrozenRow {
  double g11, g10, g02, g00, psi, phi, delta, lambda;
};

inline const std::map<std::string, FrozenRow>& frozen() {
  static const std::map<std::string, FrozenRow> table = {
      {"OM", {5.0 / 4, 5.0 / 8, 3.0 / 2, 3.0 / 2, -1.0 / 4, 5.0 / 8, -7.0 / 8, 5.0 / 8}},
      {"W1",
       {8.0 / 3, 5.0 / 18, 124.0 / 63, 5.0 / 9, 44.0 / 63, 41.0 / 42, -5.0 / 18, 71.0 / 42}},
      {"W2",
       {4.0 / 3, 1.0 / 2, 124.0 / 53, 3.0 / 2, -160.0 / 159, -1.0 / 159, -1.0, 71.0 / 53}},
      {"AW1",
       {29.0 / 12, 25.0 / 72, 113.0 / 63, 91.0 / 54, 157.0 / 252, 2965.0 / 1512, -289.0 / 216,
        689.0 / 1512}},
      {"AW2",
       {11.0 / 6, 1.0 / 8, 98.0 / 53, 2.0, -5.0 / 318, 2365.0 / 1272, -15.0 / 8, -11.0 / 424}},
      {"AW3",
       {4.0 / 3, 1.0 / 2, 124.0 / 53, 3.0 / 2, -160.0 / 159, -1.0 / 159, -1.0, 71.0 / 53}},
  };
  return table;
}

}  // namespace fixture

#endif  // EXCOMP_TESTS_FIXTURES_HPP
