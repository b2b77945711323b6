#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace excomp {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_tokens(const std::string& value) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : value) {
    if (c == ' ' || c == '\t' || c == ',') {
      if (!cur.empty()) tokens.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

long to_long(const std::string& value, const std::string& key) {
  long out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("key '" + key + "': cannot parse '" + value + "' as an integer");
  }
  return out;
}

double to_double(const std::string& value, const std::string& key) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("key '" + key + "': cannot parse '" + value + "' as a number");
  }
  return out;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse_text(const std::string& text) {
  KeyValueConfig kv;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    }
    if (kv.values_.count(key)) {
      throw ConfigError("config key '" + key + "' appears more than once");
    }
    kv.values_[key] = value;
  }
  return kv;
}

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_text(text.str());
}

bool KeyValueConfig::has(const std::string& key) const { return values_.count(key) > 0; }

std::string KeyValueConfig::require_string(const std::string& key) {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing required config key '" + key + "'");
  consumed_.insert(key);
  return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  consumed_.insert(key);
  return it->second;
}

long KeyValueConfig::get_long(const std::string& key, long fallback) {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  consumed_.insert(key);
  return to_long(it->second, key);
}

std::uint64_t KeyValueConfig::get_seed(const std::string& key, std::uint64_t fallback) {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  consumed_.insert(key);
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), out);
  if (ec != std::errc() || ptr != it->second.data() + it->second.size()) {
    throw ConfigError("key '" + key + "': cannot parse '" + it->second + "' as a seed");
  }
  return out;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  consumed_.insert(key);
  return to_double(it->second, key);
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  consumed_.insert(key);
  const std::string& v = it->second;
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw ConfigError("key '" + key + "': expected a boolean, found '" + v + "'");
}

std::vector<std::string> KeyValueConfig::get_list(const std::string& key,
                                                  std::vector<std::string> fallback) {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  consumed_.insert(key);
  return split_tokens(it->second);
}

std::vector<int> KeyValueConfig::get_int_list(const std::string& key, std::vector<int> fallback) {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  consumed_.insert(key);
  std::vector<int> out;
  for (const std::string& token : split_tokens(it->second)) {
    out.push_back(static_cast<int>(to_long(token, key)));
  }
  return out;
}

void KeyValueConfig::fail_on_unknown_keys() const {
  for (const auto& [key, value] : values_) {
    if (!consumed_.count(key)) {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
}

std::map<Cell, double> parse_known_e(const std::string& text) {
  std::map<Cell, double> out;
  for (const std::string& token : split_tokens(text)) {
    const auto colon = token.find(':');
    const auto eq = token.find('=');
    if (colon == std::string::npos || eq == std::string::npos || eq < colon) {
      throw ConfigError("known treatment probability entry '" + token +
                        "' must look like s:a=p");
    }
    Cell cell;
    cell.source = static_cast<int>(to_long(token.substr(0, colon), "known-e"));
    cell.arm = static_cast<int>(to_long(token.substr(colon + 1, eq - colon - 1), "known-e"));
    const double p = to_double(token.substr(eq + 1), "known-e");
    if (!(p > 0.0 && p < 1.0)) {
      throw ConfigError("known treatment probability for '" + token + "' must lie in (0,1)");
    }
    out[cell] = p;
  }
  return out;
}

EstimationConfig RunConfig::estimation_config() const {
  EstimationConfig config;
  config.participation.family = Family::bernoulli_logit;
  config.participation.covariates = participation_covariates;
  config.treatment.family = Family::bernoulli_logit;
  config.treatment.covariates = treatment_covariates;
  config.outcome.family = outcome_family;
  config.outcome.covariates = outcome_covariates;
  config.nuisance_options.truncation = truncation;
  config.nuisance_options.known_treatment_probs = known_e;
  return config;
}

std::vector<std::string> RunConfig::all_covariates() const {
  std::vector<std::string> names;
  auto add = [&](const std::vector<std::string>& list) {
    for (const std::string& name : list) {
      if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
    }
  };
  add(participation_covariates);
  add(treatment_covariates);
  add(outcome_covariates);
  return names;
}

RunConfig run_config_from(KeyValueConfig& kv, const Overrides& overrides,
                          const TreatmentCoding* fixed_coding) {
  RunConfig config;
  if (fixed_coding) {
    config.coding = *fixed_coding;
  } else {
    config.data_path = overrides.data ? *overrides.data : kv.require_string("data");
    const std::vector<int> index_arms = kv.get_int_list("coding.index_arms", {});
    const std::vector<int> external_arms = kv.get_int_list("coding.external_arms", {});
    if (index_arms.empty() || external_arms.empty()) {
      throw ConfigError("coding.index_arms and coding.external_arms must be given");
    }
    const long index_only = kv.get_long("coding.index_only", index_arms.front());
    const long external_only = kv.get_long("coding.external_only", external_arms.front());
    std::optional<int> shared;
    if (kv.has("coding.shared")) {
      shared = static_cast<int>(kv.get_long("coding.shared", 0));
    }
    config.coding = TreatmentCoding::make(index_arms, external_arms, static_cast<int>(index_only),
                                          static_cast<int>(external_only), shared);
  }

  config.participation_covariates = kv.get_list("models.participation.covariates", {});
  config.treatment_covariates = kv.get_list("models.treatment.covariates", {});
  config.outcome_covariates = kv.get_list("models.outcome.covariates", {});
  config.outcome_family = family_from_name(kv.get_string("models.outcome.family", "gaussian"));
  if (config.outcome_family == Family::multinomial_logit) {
    throw ConfigError("the outcome family must be gaussian or binomial");
  }

  std::vector<std::string> estimand_names = {"psi"};
  if (config.coding.shared_arm) {
    estimand_names = {"psi", "phi", "delta"};
  }
  config.estimands.clear();
  for (const std::string& name : kv.get_list("estimands", estimand_names)) {
    config.estimands.push_back(estimand_from_name(name));
  }
  for (Estimand e : config.estimands) {
    if ((e == Estimand::phi || e == Estimand::delta || e == Estimand::lambda) &&
        !config.coding.shared_arm) {
      throw MissingSharedArm("estimand '" + estimand_name(e) +
                             "' requires a shared arm in the treatment coding");
    }
  }

  config.methods.clear();
  for (const std::string& name : kv.get_list("methods", {"OM", "W1", "W2", "AW1", "AW2", "AW3"})) {
    config.methods.push_back(method_from_name(name));
  }

  const std::string scale = kv.get_string("scale", "difference");
  if (scale == "difference") {
    config.scale = Scale::difference;
  } else if (scale == "ratio") {
    config.scale = Scale::ratio;
  } else {
    throw ConfigError("scale must be 'difference' or 'ratio'");
  }

  config.inference = kv.get_string("inference", "bootstrap");
  if (config.inference != "bootstrap" && config.inference != "if-plugin" &&
      config.inference != "none") {
    throw ConfigError("inference must be 'bootstrap', 'if-plugin' or 'none'");
  }
  config.bootstrap_resamples = kv.get_long("bootstrap.resamples", config.bootstrap_resamples);
  config.bootstrap_seed = kv.get_seed("bootstrap.seed", config.bootstrap_seed);
  config.level = kv.get_double("level", config.level);
  config.truncation = kv.get_double("truncation", 0.0);
  if (kv.has("treatment.known")) {
    config.known_e = parse_known_e(kv.require_string("treatment.known"));
  }
  config.drop_incomplete = kv.get_bool("drop_incomplete", false);

  if (overrides.seed) config.bootstrap_seed = *overrides.seed;
  if (overrides.iterations) config.bootstrap_resamples = *overrides.iterations;
  if (overrides.drop_incomplete) config.drop_incomplete = *overrides.drop_incomplete;
  if (overrides.known_e) config.known_e = parse_known_e(*overrides.known_e);
  if (overrides.truncate) config.truncation = *overrides.truncate;
  if (overrides.threads) config.threads = *overrides.threads;

  kv.fail_on_unknown_keys();
  return config;
}

SimulateConfig simulate_config_from(KeyValueConfig& kv, const Overrides& overrides) {
  SimulateConfig config;
  config.dgp.covariate_count = static_cast<int>(kv.get_long("dgp.k", 3));
  const int k = config.dgp.covariate_count;
  config.dgp.pairwise_covariance = kv.get_double("dgp.cov", 0.5);
  config.dgp.treat_prob = kv.get_double("dgp.treat_prob", 0.5);
  config.dgp.outcome_intercept = kv.get_double("dgp.outcome_intercept", 0.0);
  config.dgp.noise_sd = kv.get_double("dgp.noise_sd", 1.0);
  config.dgp.calibration_draws = kv.get_long("dgp.calibration_draws", 1000000);
  config.dgp.selection_slopes =
      Eigen::VectorXd::Constant(k, kv.get_double("dgp.selection_slope", std::log(2.0)));
  config.dgp.arm1_slopes = Eigen::VectorXd::Constant(k, kv.get_double("dgp.arm1_slope", 1.0));
  config.dgp.arm2_slopes = Eigen::VectorXd::Constant(k, kv.get_double("dgp.arm2_slope", 1.0));
  config.dgp.arm0_slopes = Eigen::VectorXd::Constant(k, kv.get_double("dgp.arm0_slope", -1.0));

  config.scenario.name = kv.get_string("scenario.name", "scenario");
  config.scenario.n_index = kv.get_long("scenario.n1", 500);
  config.scenario.n_external = kv.get_long("scenario.n0", 500);
  config.scenario.iterations = kv.get_long("scenario.iterations", 1000);
  config.scenario.base_seed = kv.get_seed("scenario.seed", config.scenario.base_seed);
  config.scenario.misspecify_participation_treatment = kv.get_bool("scenario.misspecify_pe", false);
  config.scenario.misspecify_outcome = kv.get_bool("scenario.misspecify_g", false);
  if (kv.has("scenario.known_e")) {
    config.scenario.known_treat_prob = kv.get_double("scenario.known_e", 0.5);
  }
  config.scenario.methods.clear();
  for (const std::string& name :
       kv.get_list("scenario.methods", {"OM", "W1", "W2", "AW1", "AW2", "AW3"})) {
    config.scenario.methods.push_back(method_from_name(name));
  }
  config.scenario.estimands.clear();
  for (const std::string& name : kv.get_list("scenario.estimands", {"psi", "phi"})) {
    config.scenario.estimands.push_back(estimand_from_name(name));
  }

  if (overrides.seed) config.scenario.base_seed = *overrides.seed;
  if (overrides.iterations) config.scenario.iterations = *overrides.iterations;

  kv.fail_on_unknown_keys();
  config.scenario.validate();
  config.dgp.validate();
  return config;
}

}  // namespace excomp
