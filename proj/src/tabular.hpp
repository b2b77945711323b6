#ifndef EXCOMP_TABULAR_HPP
#define EXCOMP_TABULAR_HPP

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace excomp {

// Maps arbitrary integer treatment codes onto the roles needed for an
// external comparator analysis: the arm only run in the index trial, the arm
// only run in the external data, and (optionally) an arm shared by both.
struct TreatmentCoding {
  std::vector<int> index_arms;     // sorted, distinct
  std::vector<int> external_arms;  // sorted, distinct
  int index_only = 0;
  int external_only = 0;
  std::optional<int> shared_arm;

  static TreatmentCoding make(std::vector<int> index_arms, std::vector<int> external_arms,
                              int index_only, int external_only,
                              std::optional<int> shared_arm = std::nullopt);

  bool legal(int source, int arm) const;
  const std::vector<int>& arms(int source) const;
  int require_shared() const;  // throws MissingSharedArm
};

// Two-source dataset stored column-wise. Immutable after construction; safe
// to share across threads for reads.
struct CompositeDataset {
  Eigen::MatrixXd x;       // n rows, one column per covariate
  Eigen::VectorXi source;  // 1 = index trial, 0 = external
  Eigen::VectorXi arm;     // treatment codes
  Eigen::VectorXd outcome;
  std::vector<std::string> covariate_names;
  TreatmentCoding coding;
  Eigen::Index n_index = 0;
  Eigen::Index n_external = 0;

  Eigen::Index rows() const { return source.size(); }
  // column index for a covariate name, -1 if absent
  int column(const std::string& name) const;
};

// Validates shapes, finiteness, arm legality and per-source counts.
CompositeDataset make_dataset(Eigen::MatrixXd x, Eigen::VectorXi source, Eigen::VectorXi arm,
                              Eigen::VectorXd outcome, std::vector<std::string> covariate_names,
                              TreatmentCoding coding);

struct LoadOptions {
  bool drop_incomplete = false;  // listwise-delete rows with empty/NA cells
};

struct LoadReport {
  std::size_t rows_loaded = 0;
  std::size_t rows_dropped = 0;
};

// CSV loader. Requires a header with columns `s`, `a`, `y` and every named
// covariate; extra columns are ignored. Missing values are an empty cell or
// the token NA and are an error unless options.drop_incomplete is set.
CompositeDataset load_csv(const std::string& path, const TreatmentCoding& coding,
                          const std::vector<std::string>& covariate_columns,
                          const LoadOptions& options = {}, LoadReport* report = nullptr);

// Writes s,a,y plus covariates with 17 significant digits, so that
// load_csv(write_csv(ds)) reproduces ds exactly.
void write_csv(const CompositeDataset& ds, const std::string& path);

// Row positions with source == s (and arm == a when given), in dataset order.
std::vector<Eigen::Index> stratify(const CompositeDataset& ds, int s,
                                   std::optional<int> a = std::nullopt);

// Design matrix [1, covariates...] for the named columns.
Eigen::MatrixXd design_matrix(const CompositeDataset& ds, const std::vector<std::string>& covariates);

}  // namespace excomp

#endif  // EXCOMP_TABULAR_HPP
