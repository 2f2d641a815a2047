#pragma once

#include "precipgen/observations.hpp"

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace precipgen::metrics {

/// 0.01, 0.02, ..., 0.99.
std::vector<double> default_levels();

/// Throws ConfigError unless levels are strictly increasing inside (0, 1).
void validate_levels(std::span<const double> levels);

/// Nonnegative sample held as a zero count plus sorted positive values, so
/// quantiles of mostly-dry pooled data need only sort the wet part.
class PooledSample {
public:
    PooledSample() = default;
    void add(std::span<const float> values);
    void add(std::span<const double> values);
    /// Sorts; call once after the last add().
    void finalize();

    [[nodiscard]] std::size_t size() const noexcept { return zeros_ + positive_.size(); }
    [[nodiscard]] bool empty() const noexcept { return size() == 0; }
    /// Order statistic k (0-based) of the full sample.
    [[nodiscard]] double order_statistic(std::size_t k) const;
    /// Linear-interpolation quantile, h = (n - 1) level.
    [[nodiscard]] double quantile(double level) const;

private:
    std::size_t zeros_ = 0;
    std::vector<float> positive_;
    bool sorted_ = true;
};

struct QQPoint {
    double level = 0.0;
    double observed = 0.0;
    double simulated = 0.0;
};

/// Quantiles of each pooled sample at every level. Throws DataError on an
/// empty sample.
std::vector<QQPoint> pooled_qq(const PooledSample& obs, const PooledSample& sim, std::span<const double> levels);
std::vector<QQPoint> pooled_qq(std::span<const double> obs, std::span<const double> sim,
                               std::span<const double> levels);
/// All sites, days and realizations pooled.
std::vector<QQPoint> pooled_qq(const ObservationSet& obs, const SimulationSet& sims, std::span<const double> levels);

/// Population moments (divide by n); kurtosis is non-excess m4 / m2^2.
struct MomentSummary {
    std::size_t n = 0;
    double mean = 0.0;
    double sd = 0.0;
    std::optional<double> skewness; // empty when the variance is 0
    std::optional<double> kurtosis; // empty when the variance is 0
    std::optional<double> cv;       // sd / mean; empty when the mean is 0
    std::size_t wet_count = 0;      // values >= wet_threshold
    std::size_t dry_count = 0;
    double max = 0.0;
};

/// Throws DataError on an empty sample.
MomentSummary moment_summary(std::span<const double> values, double wet_threshold);
MomentSummary moment_summary(std::span<const float> values, double wet_threshold);
/// Summary of several matrices pooled.
MomentSummary moment_summary(std::span<const PrecipMatrix* const> matrices, double wet_threshold);

/// One summary per realization, in set order.
std::vector<MomentSummary> per_simulation_summaries(const SimulationSet& sims, double wet_threshold);

struct SpellDistribution {
    std::vector<std::size_t> dry;
    std::vector<std::size_t> wet;

    void append(const SpellDistribution& other);
};

/// Maximal runs below (dry) and at or above (wet) the threshold, in order of
/// occurrence.
SpellDistribution spell_lengths(std::span<const double> series, double wet_threshold);

enum class SpellMode { Regional, PerSite };

/// Spells of the regional-mean series, or of every site's series pooled.
SpellDistribution spell_lengths(const PrecipMatrix& values, double wet_threshold, SpellMode mode);

struct SpellQQ {
    std::vector<QQPoint> dry;
    std::vector<QQPoint> wet;
};

/// Throws DataError when any of the four multisets is empty.
SpellQQ spell_qq(const SpellDistribution& obs, const SpellDistribution& sim, std::span<const double> levels);

struct DayStats {
    int day_of_year = 0;
    std::size_t n = 0; // (year, site) cells
    double mean = 0.0;
    double sd = 0.0;   // population
    double max = 0.0;
};

/// Statistics per day of year over all (year, site) cells; only days of year
/// present in the calendar appear. Day 366 comes from leap years only.
std::vector<DayStats> per_day_curve(const PrecipMatrix& values, const Calendar& calendar);

struct PerDayCurves {
    std::vector<DayStats> observed;
    std::vector<std::vector<DayStats>> simulated; // per realization
};
PerDayCurves per_day_curves(const ObservationSet& obs, const SimulationSet& sims);

struct Envelope {
    std::size_t count = 0;
    double median = 0.0;
    double min = 0.0;
    double max = 0.0;
};
/// Median (linear interpolation) and range; count 0 leaves the fields NaN.
Envelope envelope(std::span<const double> values);

/// Mean across sites of a period's total precipitation and of its wet-day
/// percentage.
struct PeriodValue {
    double total = 0.0;   // mm
    double wet_pct = 0.0; // percent of days
    std::size_t days = 0;
};

/// Per month: total over that month's days across all years divided by the
/// number of years the month occurs in; entries with days == 0 are absent months.
std::array<PeriodValue, 12> monthly_values(const PrecipMatrix& values, const Calendar& calendar,
                                           double wet_threshold);

struct MonthlyAggregate {
    int month = 0;
    PeriodValue observed;
    Envelope sim_total;
    Envelope sim_wet_pct;
};
std::vector<MonthlyAggregate> monthly_aggregates(const ObservationSet& obs, const SimulationSet& sims,
                                                 double wet_threshold);

/// Per calendar year present in the span.
std::vector<std::pair<int, PeriodValue>> annual_values(const PrecipMatrix& values, const Calendar& calendar,
                                                       double wet_threshold);

struct AnnualAggregate {
    int year = 0;
    PeriodValue observed;
    Envelope sim_total;   // realizations' values for the same year
    Envelope sim_wet_pct;
};

struct AnnualAggregates {
    bool year_aligned = true;
    /// Aligned sets: one row per observed year. Unaligned sets: one row per
    /// observed year with empty simulation envelopes.
    std::vector<AnnualAggregate> years;
    /// Year-free distributions: observed across years, simulated across every
    /// (realization, year) value.
    Envelope observed_total_free;
    Envelope observed_wet_free;
    Envelope sim_total_free;
    Envelope sim_wet_free;
};
AnnualAggregates annual_aggregates(const ObservationSet& obs, const SimulationSet& sims, double wet_threshold);

} // namespace precipgen::metrics
