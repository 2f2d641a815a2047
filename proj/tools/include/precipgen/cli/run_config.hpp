#pragma once

#include "precipgen/calendar.hpp"
#include "precipgen/grid.hpp"
#include "precipgen/report.hpp"
#include "precipgen/semiparametric.hpp"
#include "precipgen/wilks.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace precipgen::cli {

/// Parameters of one pipeline run. JSON schema (all keys optional, unknown
/// keys rejected):
///
///   generator       "semiparametric" | "wilks"
///   observations    path to observations.csv
///   grid            {lat_min, lat_max, lon_min, lon_max, resolution}
///   calendar        {start, end} simulation span, YYYY-MM-DD
///   thresholds      {wet_mm, extreme_quantile}
///   semiparametric  {k, window, lambda, kde, pseudo, arima_order: [p, d, q],
///                    annual_target: "reconstruct" | "forecast", annual_innovations}
///   wilks           {pseudo, calibration_tolerance, max_iterations}
///   evaluation      {levels: [...], spell_mode: "regional" | "per_site"}
///   n_sims, seed, jobs
///   bundle          model bundle directory
///   simulations     [paths to simulations.csv] for evaluate
///   labels          [report labels], parallel to simulations
///   out             output directory
struct RunConfig {
    std::optional<std::string> generator; // fit defaults to semiparametric
    std::optional<std::filesystem::path> observations;
    std::optional<GridSpec> grid;
    std::optional<Calendar> calendar;
    double wet_threshold = 0.3;
    double extreme_quantile = 0.8;
    semiparametric::SemiParamConfig semiparametric;
    wilks::WilksConfig wilks;
    report::ReportConfig evaluation;
    std::size_t n_sims = 20;
    std::uint64_t seed = 0;
    unsigned jobs = 1;
    std::optional<std::filesystem::path> bundle;
    std::vector<std::filesystem::path> simulations;
    std::vector<std::string> labels;
    std::optional<std::filesystem::path> out;

    [[nodiscard]] std::string generator_name() const {
        return generator.value_or(semiparametric::kGeneratorName);
    }
    /// Pushes the shared thresholds into the module configurations.
    void apply_thresholds();
    /// Throws ConfigError naming the offending field.
    void validate() const;
};

/// Throws ConfigError for unknown keys, wrong types or out-of-range values.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

/// Effective configuration, suitable for parse_run_config.
nlohmann::json to_json(const RunConfig& config);

} // namespace precipgen::cli
