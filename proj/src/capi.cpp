#include "excomp.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include <json.hpp>

#include "commands.hpp"
#include "config.hpp"

namespace {

using nlohmann::json;

thread_local std::string t_last_error;

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

excomp_status record_error(const std::exception& e, excomp_status status) {
  t_last_error = e.what();
  return status;
}

template <typename Fn>
excomp_status guarded(Fn&& fn) {
  try {
    fn();
    return EXCOMP_OK;
  } catch (const excomp::Error& e) {
    return record_error(e, static_cast<excomp_status>(e.category()));
  } catch (const json::exception& e) {
    return record_error(e, EXCOMP_ERR_CONFIG);
  } catch (const std::exception& e) {
    return record_error(e, EXCOMP_ERR_INTERNAL);
  }
}

json parse_options(const char* options_json) {
  if (!options_json || !*options_json) return json::object();
  json j = json::parse(options_json);
  if (!j.is_object()) throw excomp::ConfigError("options JSON must be an object");
  return j;
}

// flat dotted keys with scalar or flat-array values, as in the config files
excomp::KeyValueConfig kv_from_json(const json& j, const std::vector<std::string>& skip = {}) {
  std::string text;
  for (const auto& [key, value] : j.items()) {
    bool skipped = false;
    for (const std::string& s : skip) skipped = skipped || key == s;
    if (skipped) continue;
    text += key;
    text += " = ";
    if (value.is_string()) {
      text += value.get<std::string>();
    } else if (value.is_array()) {
      bool first = true;
      for (const auto& item : value) {
        if (!first) text += " ";
        first = false;
        text += item.is_string() ? item.get<std::string>() : item.dump();
      }
    } else if (value.is_object()) {
      throw excomp::ConfigError("options key '" + key + "' must be flat (use dotted keys)");
    } else {
      text += value.dump();
    }
    text += "\n";
  }
  return excomp::KeyValueConfig::parse_text(text);
}

excomp::Overrides overrides_from(const json& j) {
  excomp::Overrides o;
  if (j.contains("data")) o.data = j["data"].get<std::string>();
  if (j.contains("seed")) o.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("iterations")) o.iterations = j["iterations"].get<long>();
  if (j.contains("full")) o.full = j["full"].get<bool>();
  if (j.contains("drop_incomplete")) o.drop_incomplete = j["drop_incomplete"].get<bool>();
  if (j.contains("known_e")) o.known_e = j["known_e"].get<std::string>();
  if (j.contains("truncate")) o.truncate = j["truncate"].get<double>();
  if (j.contains("threads")) o.threads = j["threads"].get<int>();
  return o;
}

}  // namespace

struct excomp_dataset {
  excomp::CompositeDataset ds;
  excomp::LoadReport report;
};

extern "C" {

const char* excomp_version(void) {
  static const std::string version = excomp::library_version();
  return version.c_str();
}

const char* excomp_last_error(void) { return t_last_error.c_str(); }

void excomp_free_string(char* s) { std::free(s); }

excomp_status excomp_dataset_load_csv(const char* csv_path, const char* options_json,
                                      excomp_dataset** out) {
  if (!csv_path || !out) {
    t_last_error = "csv_path and out must not be null";
    return EXCOMP_ERR_INTERNAL;
  }
  *out = nullptr;
  return guarded([&]() {
    const json options = parse_options(options_json);
    if (!options.contains("coding")) {
      throw excomp::ConfigError("dataset options must contain a 'coding' object");
    }
    const json& cj = options["coding"];
    std::optional<int> shared;
    if (cj.contains("shared") && !cj["shared"].is_null()) shared = cj["shared"].get<int>();
    const excomp::TreatmentCoding coding = excomp::TreatmentCoding::make(
        cj.at("index_arms").get<std::vector<int>>(),
        cj.at("external_arms").get<std::vector<int>>(), cj.at("index_only").get<int>(),
        cj.at("external_only").get<int>(), shared);
    std::vector<std::string> covariates;
    if (options.contains("covariates")) {
      covariates = options["covariates"].get<std::vector<std::string>>();
    }
    excomp::LoadOptions load_options;
    if (options.contains("drop_incomplete")) {
      load_options.drop_incomplete = options["drop_incomplete"].get<bool>();
    }
    auto handle = new excomp_dataset;
    handle->ds = excomp::load_csv(csv_path, coding, covariates, load_options, &handle->report);
    *out = handle;
  });
}

void excomp_dataset_free(excomp_dataset* ds) { delete ds; }

excomp_status excomp_dataset_counts(const excomp_dataset* ds, int64_t* rows, int64_t* n_index,
                                    int64_t* n_external) {
  if (!ds) {
    t_last_error = "dataset handle is null";
    return EXCOMP_ERR_INTERNAL;
  }
  if (rows) *rows = ds->ds.rows();
  if (n_index) *n_index = ds->ds.n_index;
  if (n_external) *n_external = ds->ds.n_external;
  return EXCOMP_OK;
}

excomp_status excomp_estimate(const excomp_dataset* ds, const char* options_json,
                              char** result_json) {
  if (!ds || !result_json) {
    t_last_error = "dataset handle and result pointer must not be null";
    return EXCOMP_ERR_INTERNAL;
  }
  *result_json = nullptr;
  return guarded([&]() {
    excomp::KeyValueConfig kv = kv_from_json(parse_options(options_json));
    const excomp::RunConfig config = excomp::run_config_from(kv, {}, &ds->ds.coding);
    const auto doc = excomp::estimate_document(ds->ds, ds->report, config);
    *result_json = dup_string(doc.dump(2));
  });
}

excomp_status excomp_diagnose(const excomp_dataset* ds, const char* options_json,
                              char** result_json) {
  if (!ds || !result_json) {
    t_last_error = "dataset handle and result pointer must not be null";
    return EXCOMP_ERR_INTERNAL;
  }
  *result_json = nullptr;
  return guarded([&]() {
    excomp::KeyValueConfig kv = kv_from_json(parse_options(options_json));
    const excomp::RunConfig config = excomp::run_config_from(kv, {}, &ds->ds.coding);
    const auto doc = excomp::diagnose_document(ds->ds, ds->report, config);
    *result_json = dup_string(doc.dump(2));
  });
}

excomp_status excomp_run_estimate(const char* config_path, const char* overrides_json,
                                  char** result_json) {
  if (!config_path || !result_json) {
    t_last_error = "config_path and result pointer must not be null";
    return EXCOMP_ERR_INTERNAL;
  }
  *result_json = nullptr;
  return guarded([&]() {
    const excomp::Overrides overrides = overrides_from(parse_options(overrides_json));
    excomp::KeyValueConfig kv = excomp::KeyValueConfig::parse_file(config_path);
    excomp::RunConfig config = excomp::run_config_from(kv, overrides);
    if (overrides.threads) config.threads = *overrides.threads;
    const auto doc = excomp::cmd_estimate(config);
    *result_json = dup_string(doc.dump(2));
  });
}

excomp_status excomp_run_diagnose(const char* config_path, const char* overrides_json,
                                  char** result_json) {
  if (!config_path || !result_json) {
    t_last_error = "config_path and result pointer must not be null";
    return EXCOMP_ERR_INTERNAL;
  }
  *result_json = nullptr;
  return guarded([&]() {
    const excomp::Overrides overrides = overrides_from(parse_options(overrides_json));
    excomp::KeyValueConfig kv = excomp::KeyValueConfig::parse_file(config_path);
    excomp::RunConfig config = excomp::run_config_from(kv, overrides);
    const auto doc = excomp::cmd_diagnose(config);
    *result_json = dup_string(doc.dump(2));
  });
}

excomp_status excomp_run_simulate(const char* config_path, const char* overrides_json,
                                  char** result_json) {
  if (!result_json) {
    t_last_error = "result pointer must not be null";
    return EXCOMP_ERR_INTERNAL;
  }
  *result_json = nullptr;
  return guarded([&]() {
    const excomp::Overrides overrides = overrides_from(parse_options(overrides_json));
    nlohmann::ordered_json doc;
    if (overrides.full) {
      doc = excomp::cmd_simulate_full(overrides);
    } else {
      if (!config_path) {
        throw excomp::ConfigError("simulate needs a config file unless --full is given");
      }
      excomp::KeyValueConfig kv = excomp::KeyValueConfig::parse_file(config_path);
      const excomp::SimulateConfig config = excomp::simulate_config_from(kv, overrides);
      doc = excomp::cmd_simulate(config, overrides.threads ? *overrides.threads : 1);
    }
    *result_json = dup_string(doc.dump(2));
  });
}

}  // extern "C"
