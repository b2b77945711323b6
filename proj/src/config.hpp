#ifndef EXCOMP_CONFIG_HPP
#define EXCOMP_CONFIG_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "estimators.hpp"
#include "simulation.hpp"

namespace excomp {

// Flat `key = value` configuration text with dotted section prefixes.
// Full-line comments start with '#'. Every key must be consumed by the
// typed builders; leftovers are configuration errors.
class KeyValueConfig {
 public:
  static KeyValueConfig parse_text(const std::string& text);
  static KeyValueConfig parse_file(const std::string& path);

  bool has(const std::string& key) const;
  std::string require_string(const std::string& key);
  std::string get_string(const std::string& key, const std::string& fallback);
  long get_long(const std::string& key, long fallback);
  std::uint64_t get_seed(const std::string& key, std::uint64_t fallback);
  double get_double(const std::string& key, double fallback);
  bool get_bool(const std::string& key, bool fallback);
  // whitespace- or comma-separated; an empty value yields an empty list
  std::vector<std::string> get_list(const std::string& key, std::vector<std::string> fallback);
  std::vector<int> get_int_list(const std::string& key, std::vector<int> fallback);

  void fail_on_unknown_keys() const;

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> consumed_;
};

// CLI-level overrides applied on top of a config file.
struct Overrides {
  std::optional<std::string> data;
  std::optional<std::uint64_t> seed;
  std::optional<long> iterations;
  bool full = false;
  std::optional<bool> drop_incomplete;
  std::optional<std::string> known_e;  // "s:a=p" entries, comma separated
  std::optional<double> truncate;
  std::optional<int> threads;
};

// Everything cmd_estimate / cmd_diagnose need.
struct RunConfig {
  std::string data_path;
  TreatmentCoding coding;
  std::vector<std::string> participation_covariates;
  std::vector<std::string> treatment_covariates;
  std::vector<std::string> outcome_covariates;
  Family outcome_family = Family::gaussian_identity;
  std::vector<Estimand> estimands;
  std::vector<Method> methods;
  Scale scale = Scale::difference;
  std::string inference = "bootstrap";  // bootstrap | if-plugin | none
  long bootstrap_resamples = 1000;
  std::uint64_t bootstrap_seed = 20260810;
  double level = 0.95;
  double truncation = 0.0;
  std::map<Cell, double> known_e;
  bool drop_incomplete = false;
  int threads = 1;

  EstimationConfig estimation_config() const;
  // covariates any model references, in first-appearance order
  std::vector<std::string> all_covariates() const;
};

struct SimulateConfig {
  SimulationScenario scenario;
  DgpParams dgp = DgpParams::defaults();
};

// Builds the estimate/diagnose configuration. When fixed_coding is given the
// data/coding keys are taken from it instead of the config (the dataset is
// already in memory).
RunConfig run_config_from(KeyValueConfig& kv, const Overrides& overrides,
                          const TreatmentCoding* fixed_coding = nullptr);
SimulateConfig simulate_config_from(KeyValueConfig& kv, const Overrides& overrides);

std::map<Cell, double> parse_known_e(const std::string& text);

}  // namespace excomp

#endif  // EXCOMP_CONFIG_HPP
