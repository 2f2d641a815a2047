#pragma once

#include "precipgen/metrics.hpp"
#include "precipgen/observations.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace precipgen::report {

struct ReportConfig {
    double wet_threshold = 0.3;
    std::vector<double> levels = metrics::default_levels();
    metrics::SpellMode spell_mode = metrics::SpellMode::Regional;

    void validate() const;
};

struct SpellCounts {
    std::size_t dry = 0;
    std::size_t wet = 0;
    std::size_t max_dry = 0;
    std::size_t max_wet = 0;
};

struct EvaluationReport {
    ReportConfig config;
    std::string source;    // label of the simulation input
    std::string generator;
    bool year_aligned = true;
    std::size_t realizations = 0;
    std::size_t sites = 0;
    std::size_t observed_days = 0;
    std::size_t simulated_days = 0;

    std::vector<metrics::QQPoint> qq;
    metrics::MomentSummary observed_moments;
    metrics::MomentSummary simulated_moments;
    std::vector<int> sim_ids;
    std::vector<metrics::MomentSummary> per_simulation;
    SpellCounts observed_spells;
    SpellCounts simulated_spells;
    metrics::SpellQQ spells;
    metrics::PerDayCurves per_day;
    std::vector<metrics::MonthlyAggregate> monthly;
    metrics::AnnualAggregates annual;
};

/// Throws DataError when the grids differ or either input is empty.
EvaluationReport build_report(const ObservationSet& obs, const SimulationSet& sims, const ReportConfig& config,
                              std::string source);

/// Summary statistics of one report: column name and formatted value.
using SummaryRow = std::vector<std::pair<std::string, std::string>>;
SummaryRow summary_row(const EvaluationReport& report);

nlohmann::json to_json(const EvaluationReport& report);

/// qq.csv, moments.csv, per_sim_moments.csv, spells.csv, per_day.csv,
/// monthly.csv, annual.csv and report.json.
void write_report(const EvaluationReport& report, const std::filesystem::path& dir);

inline constexpr const char* kReportFiles[] = {"qq.csv",     "moments.csv", "per_sim_moments.csv", "spells.csv",
                                               "per_day.csv", "monthly.csv", "annual.csv"};

/// One row per summary; all rows must share the same columns.
void write_comparison(const std::vector<SummaryRow>& rows, const std::filesystem::path& path);

/// Reads the summary stored in a report directory's report.json.
SummaryRow read_summary(const std::filesystem::path& report_dir);

} // namespace precipgen::report
