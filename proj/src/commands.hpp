#ifndef EXCOMP_COMMANDS_HPP
#define EXCOMP_COMMANDS_HPP

#include <string>

#include <json.hpp>

#include "config.hpp"

namespace excomp {

// The command implementations behind the C API and the CLI. Each returns the
// full machine-readable result document; renderings meant for the terminal
// live under the document's "table" keys.
nlohmann::ordered_json cmd_estimate(const RunConfig& config);
nlohmann::ordered_json cmd_diagnose(const RunConfig& config);

// document builders over an already-loaded dataset (the C API handle path)
nlohmann::ordered_json estimate_document(const CompositeDataset& ds, const LoadReport& report,
                                         const RunConfig& config);
nlohmann::ordered_json diagnose_document(const CompositeDataset& ds, const LoadReport& report,
                                         const RunConfig& config);
nlohmann::ordered_json cmd_simulate(const SimulateConfig& config, int threads);
// the built-in full grid: the five sample-size scenarios plus the three
// misspecification scenarios, 10,000 iterations each unless overridden
nlohmann::ordered_json cmd_simulate_full(const Overrides& overrides);

std::string library_version();

}  // namespace excomp

#endif  // EXCOMP_COMMANDS_HPP
