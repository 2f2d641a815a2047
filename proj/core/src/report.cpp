#include "precipgen/report.hpp"

#include "precipgen/error.hpp"
#include "precipgen/io.hpp"
#include "precipgen/stats.hpp"

#include <cmath>
#include <fstream>
#include <optional>

namespace precipgen::report {

namespace fs = std::filesystem;
using metrics::QQPoint;

void ReportConfig::validate() const {
    if (!(wet_threshold > 0.0) || !std::isfinite(wet_threshold)) {
        throw ConfigError("evaluation wet_threshold must be positive");
    }
    metrics::validate_levels(levels);
}

namespace {

SpellCounts counts_of(const metrics::SpellDistribution& d) {
    SpellCounts c;
    c.dry = d.dry.size();
    c.wet = d.wet.size();
    for (auto v : d.dry) {
        c.max_dry = std::max(c.max_dry, v);
    }
    for (auto v : d.wet) {
        c.max_wet = std::max(c.max_wet, v);
    }
    return c;
}

std::string num(double v) { return std::isfinite(v) ? format_number(v) : std::string("NA"); }
std::string num(const std::optional<double>& v) { return v ? num(*v) : std::string("NA"); }

std::ofstream open_csv(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    return out;
}

constexpr const char* kMomentHeader = "n,mean,sd,skewness,kurtosis,cv,wet_count,dry_count,max";

std::string moment_cells(const metrics::MomentSummary& m) {
    return std::to_string(m.n) + ',' + num(m.mean) + ',' + num(m.sd) + ',' + num(m.skewness) + ',' +
           num(m.kurtosis) + ',' + num(m.cv) + ',' + std::to_string(m.wet_count) + ',' +
           std::to_string(m.dry_count) + ',' + num(m.max);
}

nlohmann::json moment_json(const metrics::MomentSummary& m) {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    return {{"n", m.n},        {"mean", m.mean},           {"sd", m.sd},
            {"skewness", opt(m.skewness)}, {"kurtosis", opt(m.kurtosis)}, {"cv", opt(m.cv)},
            {"wet_count", m.wet_count}, {"dry_count", m.dry_count}, {"max", m.max}};
}

std::string envelope_cells(const metrics::Envelope& e) {
    return num(e.median) + ',' + num(e.min) + ',' + num(e.max);
}

double quantile_gap_at(const std::vector<QQPoint>& qq, double level) {
    for (const auto& p : qq) {
        if (std::abs(p.level - level) < 1e-12) {
            return p.simulated - p.observed;
        }
    }
    return std::numeric_limits<double>::quiet_NaN();
}

} // namespace

EvaluationReport build_report(const ObservationSet& obs, const SimulationSet& sims, const ReportConfig& config,
                              std::string source) {
    config.validate();
    if (sims.empty()) {
        throw DataError("simulation set '" + source + "' has no realizations");
    }
    if (!sims.grid().compatible_with(obs.grid())) {
        throw DataError("simulation set '" + source + "' grid does not match the observations grid");
    }
    EvaluationReport r;
    r.config = config;
    r.source = std::move(source);
    r.generator = sims.generator();
    r.year_aligned = sims.year_aligned();
    r.realizations = sims.size();
    r.sites = obs.site_count();
    r.observed_days = obs.day_count();
    r.simulated_days = sims.calendar().day_count();

    r.qq = metrics::pooled_qq(obs, sims, config.levels);
    r.observed_moments = metrics::moment_summary(obs.values().values(), config.wet_threshold);
    std::vector<const PrecipMatrix*> mats;
    for (const auto& real : sims.realizations()) {
        mats.push_back(&real.values);
        r.sim_ids.push_back(real.info.sim_id);
    }
    r.simulated_moments = metrics::moment_summary(mats, config.wet_threshold);
    r.per_simulation = metrics::per_simulation_summaries(sims, config.wet_threshold);

    const auto obs_spells = metrics::spell_lengths(obs.values(), config.wet_threshold, config.spell_mode);
    metrics::SpellDistribution sim_spells;
    for (const auto& real : sims.realizations()) {
        sim_spells.append(metrics::spell_lengths(real.values, config.wet_threshold, config.spell_mode));
    }
    r.observed_spells = counts_of(obs_spells);
    r.simulated_spells = counts_of(sim_spells);
    if (!obs_spells.dry.empty() && !obs_spells.wet.empty() && !sim_spells.dry.empty() && !sim_spells.wet.empty()) {
        r.spells = metrics::spell_qq(obs_spells, sim_spells, config.levels);
    }

    r.per_day = metrics::per_day_curves(obs, sims);
    r.monthly = metrics::monthly_aggregates(obs, sims, config.wet_threshold);
    r.annual = metrics::annual_aggregates(obs, sims, config.wet_threshold);
    return r;
}

SummaryRow summary_row(const EvaluationReport& r) {
    double qq_mean = 0.0, qq_max = 0.0;
    for (const auto& p : r.qq) {
        const double d = std::abs(p.simulated - p.observed);
        qq_mean += d;
        qq_max = std::max(qq_max, d);
    }
    qq_mean /= static_cast<double>(r.qq.size());

    double month_total_sq = 0.0, month_wet_sq = 0.0;
    std::size_t months = 0;
    for (const auto& m : r.monthly) {
        if (m.observed.days > 0 && m.sim_total.count > 0) {
            month_total_sq += std::pow(m.sim_total.median - m.observed.total, 2);
            month_wet_sq += std::pow(m.sim_wet_pct.median - m.observed.wet_pct, 2);
            ++months;
        }
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double month_total_rmse = months ? std::sqrt(month_total_sq / static_cast<double>(months)) : nan;
    const double month_wet_rmse = months ? std::sqrt(month_wet_sq / static_cast<double>(months)) : nan;

    double annual_corr = nan;
    if (r.year_aligned) {
        std::vector<double> o, s;
        for (const auto& y : r.annual.years) {
            if (y.sim_total.count > 0 && y.observed.days > 0) {
                o.push_back(y.observed.total);
                s.push_back(y.sim_total.median);
            }
        }
        if (o.size() >= 3) {
            annual_corr = stats::pearson(o, s);
        }
    }
    const auto& sm = r.simulated_moments;
    return {{"source", r.source},
            {"generator", r.generator},
            {"year_aligned", r.year_aligned ? "true" : "false"},
            {"realizations", std::to_string(r.realizations)},
            {"mean", num(sm.mean)},
            {"sd", num(sm.sd)},
            {"skewness", num(sm.skewness)},
            {"kurtosis", num(sm.kurtosis)},
            {"cv", num(sm.cv)},
            {"wet_pct", num(100.0 * static_cast<double>(sm.wet_count) / static_cast<double>(sm.n))},
            {"max", num(sm.max)},
            {"qq_mean_abs_diff", num(qq_mean)},
            {"qq_max_abs_diff", num(qq_max)},
            {"dry_spell_q95_diff", num(r.spells.dry.empty() ? nan : quantile_gap_at(r.spells.dry, 0.95))},
            {"wet_spell_q95_diff", num(r.spells.wet.empty() ? nan : quantile_gap_at(r.spells.wet, 0.95))},
            {"monthly_total_rmse", num(month_total_rmse)},
            {"monthly_wet_pct_rmse", num(month_wet_rmse)},
            {"annual_total_corr", num(annual_corr)}};
}

nlohmann::json to_json(const EvaluationReport& r) {
    nlohmann::json summary = nlohmann::json::array();
    for (const auto& [k, v] : summary_row(r)) {
        summary.push_back({k, v});
    }
    return {
        {"format", "precipgen-report"},
        {"version", 1},
        {"source", r.source},
        {"generator", r.generator},
        {"year_aligned", r.year_aligned},
        {"conventions",
         {{"quantile", "linear interpolation between order statistics, h = (n - 1) p"},
          {"moments", "population (divide by n)"},
          {"kurtosis", "non-excess, m4 / m2^2"},
          {"cv", "sd / mean over all values including dry days"},
          {"wet_day", "value >= wet_threshold"},
          {"spells", r.config.spell_mode == metrics::SpellMode::Regional ? "regional-mean series"
                                                                          : "per-site series pooled"},
          {"monthly_total", "site mean of the month's total over all years divided by the number of years"},
          {"annual", r.year_aligned ? "per calendar year" : "year-free distributions"}}},
        {"thresholds", {{"wet_threshold", r.config.wet_threshold}}},
        {"levels", r.config.levels},
        {"sample_sizes",
         {{"sites", r.sites},
          {"realizations", r.realizations},
          {"observed_days", r.observed_days},
          {"simulated_days", r.simulated_days},
          {"observed_values", r.observed_moments.n},
          {"simulated_values", r.simulated_moments.n},
          {"observed_dry_spells", r.observed_spells.dry},
          {"observed_wet_spells", r.observed_spells.wet},
          {"simulated_dry_spells", r.simulated_spells.dry},
          {"simulated_wet_spells", r.simulated_spells.wet}}},
        {"moments", {{"observed", moment_json(r.observed_moments)}, {"simulated", moment_json(r.simulated_moments)}}},
        {"spells",
         {{"observed_max_dry", r.observed_spells.max_dry},
          {"observed_max_wet", r.observed_spells.max_wet},
          {"simulated_max_dry", r.simulated_spells.max_dry},
          {"simulated_max_wet", r.simulated_spells.max_wet}}},
        {"files", kReportFiles},
        {"summary", summary}};
}

void write_report(const EvaluationReport& r, const fs::path& dir) {
    fs::create_directories(dir);
    {
        auto out = open_csv(dir / "qq.csv");
        out << "level,observed,simulated\n";
        for (const auto& p : r.qq) {
            out << num(p.level) << ',' << num(p.observed) << ',' << num(p.simulated) << '\n';
        }
    }
    {
        auto out = open_csv(dir / "moments.csv");
        out << "source," << kMomentHeader << '\n';
        out << "observed," << moment_cells(r.observed_moments) << '\n';
        out << "simulated," << moment_cells(r.simulated_moments) << '\n';
    }
    {
        auto out = open_csv(dir / "per_sim_moments.csv");
        out << "sim_id," << kMomentHeader << '\n';
        for (std::size_t i = 0; i < r.per_simulation.size(); ++i) {
            out << r.sim_ids[i] << ',' << moment_cells(r.per_simulation[i]) << '\n';
        }
    }
    {
        auto out = open_csv(dir / "spells.csv");
        out << "kind,level,observed,simulated\n";
        for (const auto* kind : {"dry", "wet"}) {
            const auto& pts = std::string(kind) == "dry" ? r.spells.dry : r.spells.wet;
            for (const auto& p : pts) {
                out << kind << ',' << num(p.level) << ',' << num(p.observed) << ',' << num(p.simulated) << '\n';
            }
        }
    }
    {
        auto out = open_csv(dir / "per_day.csv");
        out << "source,sim_id,day_of_year,n,mean,sd,max\n";
        auto rows = [&](const std::string& src, const std::string& id, const std::vector<metrics::DayStats>& c) {
            for (const auto& d : c) {
                out << src << ',' << id << ',' << d.day_of_year << ',' << d.n << ',' << num(d.mean) << ','
                    << num(d.sd) << ',' << num(d.max) << '\n';
            }
        };
        rows("observed", "", r.per_day.observed);
        for (std::size_t i = 0; i < r.per_day.simulated.size(); ++i) {
            rows("simulated", std::to_string(r.sim_ids[i]), r.per_day.simulated[i]);
        }
    }
    {
        auto out = open_csv(dir / "monthly.csv");
        out << "month,observed_total,sim_median_total,sim_min_total,sim_max_total,"
               "observed_wet_pct,sim_median_wet_pct,sim_min_wet_pct,sim_max_wet_pct,sim_count\n";
        for (const auto& m : r.monthly) {
            out << m.month << ',' << num(m.observed.total) << ',' << envelope_cells(m.sim_total) << ','
                << num(m.observed.wet_pct) << ',' << envelope_cells(m.sim_wet_pct) << ',' << m.sim_total.count
                << '\n';
        }
    }
    {
        auto out = open_csv(dir / "annual.csv");
        out << "year,observed_total,sim_median_total,sim_min_total,sim_max_total,"
               "observed_wet_pct,sim_median_wet_pct,sim_min_wet_pct,sim_max_wet_pct,sim_count\n";
        for (const auto& y : r.annual.years) {
            out << y.year << ',' << num(y.observed.total) << ',' << envelope_cells(y.sim_total) << ','
                << num(y.observed.wet_pct) << ',' << envelope_cells(y.sim_wet_pct) << ',' << y.sim_total.count
                << '\n';
        }
        const auto& a = r.annual;
        out << "year_free," << num(a.observed_total_free.median) << ',' << envelope_cells(a.sim_total_free) << ','
            << num(a.observed_wet_free.median) << ',' << envelope_cells(a.sim_wet_free) << ','
            << a.sim_total_free.count << '\n';
    }
    write_json_file(to_json(r), dir / "report.json");
}

void write_comparison(const std::vector<SummaryRow>& rows, const fs::path& path) {
    if (rows.empty()) {
        throw DataError("comparison table needs at least one row");
    }
    auto out = open_csv(path);
    for (std::size_t c = 0; c < rows.front().size(); ++c) {
        out << (c ? "," : "") << rows.front()[c].first;
    }
    out << '\n';
    for (const auto& row : rows) {
        if (row.size() != rows.front().size()) {
            throw DataError("comparison rows differ in columns");
        }
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (row[c].first != rows.front()[c].first) {
                throw DataError("comparison rows differ in columns");
            }
            const auto& v = row[c].second;
            const bool quote = v.find_first_of(",\"\n") != std::string::npos;
            out << (c ? "," : "");
            if (quote) {
                out << '"';
                for (char ch : v) {
                    out << (ch == '"' ? "\"\"" : std::string(1, ch));
                }
                out << '"';
            } else {
                out << v;
            }
        }
        out << '\n';
    }
}

SummaryRow read_summary(const fs::path& report_dir) {
    const auto j = read_json_file(report_dir / "report.json");
    SummaryRow row;
    try {
        for (const auto& cell : j.at("summary")) {
            row.emplace_back(cell.at(0).get<std::string>(), cell.at(1).get<std::string>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError((report_dir / "report.json").string() + ": malformed summary: " + e.what());
    }
    return row;
}

} // namespace precipgen::report
