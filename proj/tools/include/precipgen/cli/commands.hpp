#pragma once

#include "precipgen/cli/run_config.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace precipgen::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;

/// Fits the configured generator on `observations` and writes the bundle to
/// `out` (or `bundle`), with manifest.json. Prints fit diagnostics.
void cmd_fit(const RunConfig& config, std::ostream& log);

/// Loads `bundle` and writes out/simulations.csv, out/metadata.json and
/// out/manifest.json. DataError when the bundle's generator or grid differs
/// from the configured ones.
void cmd_simulate(const RunConfig& config, std::ostream& log);

/// One report directory per simulation source under `out`, plus
/// out/comparison.csv and out/manifest.json.
void cmd_evaluate(const RunConfig& config, std::ostream& log);

/// Collects the summaries of existing report directories (or directories
/// holding them), prints the comparison table and, with `out`, writes
/// out/comparison.csv.
void cmd_report(const RunConfig& config, const std::vector<std::filesystem::path>& inputs, std::ostream& log);

/// Fixed-order JSON description of a run: tool version, command, effective
/// configuration and SHA-256 of every input and output file.
nlohmann::json manifest(const std::string& command, const RunConfig& config,
                        const std::vector<std::pair<std::string, std::filesystem::path>>& inputs,
                        const std::vector<std::filesystem::path>& outputs, const nlohmann::json& extra = nullptr);

/// Entry point shared by the executable and in-process tests; returns the
/// process exit code (0 success, 2 usage or configuration, 3 data or model).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace precipgen::cli
