#include "precipgen/metrics.hpp"

#include "precipgen/error.hpp"
#include "precipgen/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace precipgen::metrics {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

} // namespace

std::vector<double> default_levels() {
    std::vector<double> levels;
    for (int i = 1; i <= 99; ++i) {
        levels.push_back(i / 100.0);
    }
    return levels;
}

void validate_levels(std::span<const double> levels) {
    if (levels.empty()) {
        throw ConfigError("quantile levels must not be empty");
    }
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (!(levels[i] > 0.0 && levels[i] < 1.0)) {
            throw ConfigError("quantile levels must lie in (0, 1)");
        }
        if (i > 0 && !(levels[i] > levels[i - 1])) {
            throw ConfigError("quantile levels must be strictly increasing");
        }
    }
}

void PooledSample::add(std::span<const float> values) {
    for (float v : values) {
        if (v > 0.0f) {
            positive_.push_back(v);
        } else {
            ++zeros_;
        }
    }
    sorted_ = false;
}

void PooledSample::add(std::span<const double> values) {
    for (double v : values) {
        if (v > 0.0) {
            positive_.push_back(static_cast<float>(v));
        } else {
            ++zeros_;
        }
    }
    sorted_ = false;
}

void PooledSample::finalize() {
    if (!sorted_) {
        std::sort(positive_.begin(), positive_.end());
        sorted_ = true;
    }
}

double PooledSample::order_statistic(std::size_t k) const {
    if (!sorted_) {
        throw std::logic_error("PooledSample used before finalize()");
    }
    if (k >= size()) {
        throw std::out_of_range("order statistic beyond sample size");
    }
    return k < zeros_ ? 0.0 : static_cast<double>(positive_[k - zeros_]);
}

double PooledSample::quantile(double level) const {
    if (empty()) {
        throw DataError("quantile of an empty sample");
    }
    const double h = static_cast<double>(size() - 1) * level;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, size() - 1);
    const double a = order_statistic(lo);
    const double b = order_statistic(hi);
    return a + (h - static_cast<double>(lo)) * (b - a);
}

std::vector<QQPoint> pooled_qq(const PooledSample& obs, const PooledSample& sim, std::span<const double> levels) {
    validate_levels(levels);
    if (obs.empty() || sim.empty()) {
        throw DataError("QQ comparison needs nonempty observed and simulated samples");
    }
    std::vector<QQPoint> out;
    out.reserve(levels.size());
    for (double l : levels) {
        out.push_back({l, obs.quantile(l), sim.quantile(l)});
    }
    return out;
}

std::vector<QQPoint> pooled_qq(std::span<const double> obs, std::span<const double> sim,
                               std::span<const double> levels) {
    validate_levels(levels);
    if (obs.empty() || sim.empty()) {
        throw DataError("QQ comparison needs nonempty observed and simulated samples");
    }
    std::vector<double> a(obs.begin(), obs.end());
    std::vector<double> b(sim.begin(), sim.end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::vector<QQPoint> out;
    for (double l : levels) {
        out.push_back({l, stats::quantile_sorted<double>(a, l), stats::quantile_sorted<double>(b, l)});
    }
    return out;
}

std::vector<QQPoint> pooled_qq(const ObservationSet& obs, const SimulationSet& sims, std::span<const double> levels) {
    PooledSample o;
    o.add(obs.values().values());
    o.finalize();
    PooledSample s;
    for (const auto& r : sims.realizations()) {
        s.add(r.values.values());
    }
    s.finalize();
    return pooled_qq(o, s, levels);
}

namespace {

template <typename Visit>
MomentSummary summarize(Visit&& visit, double wet_threshold) {
    MomentSummary m;
    double sum = 0.0;
    double max = -std::numeric_limits<double>::infinity();
    visit([&](double v) {
        ++m.n;
        sum += v;
        max = std::max(max, v);
        m.wet_count += v >= wet_threshold;
    });
    if (m.n == 0) {
        throw DataError("moment summary of an empty sample");
    }
    const double n = static_cast<double>(m.n);
    m.mean = sum / n;
    m.max = max;
    m.dry_count = m.n - m.wet_count;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    visit([&](double v) {
        const double d = v - m.mean;
        const double d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    });
    m2 /= n;
    m3 /= n;
    m4 /= n;
    m.sd = std::sqrt(m2);
    if (m2 > 0.0) {
        m.skewness = m3 / std::pow(m2, 1.5);
        m.kurtosis = m4 / (m2 * m2);
    }
    if (m.mean != 0.0) {
        m.cv = m.sd / m.mean;
    }
    return m;
}

} // namespace

MomentSummary moment_summary(std::span<const double> values, double wet_threshold) {
    return summarize([&](auto&& f) { for (double v : values) f(v); }, wet_threshold);
}

MomentSummary moment_summary(std::span<const float> values, double wet_threshold) {
    return summarize([&](auto&& f) { for (float v : values) f(static_cast<double>(v)); }, wet_threshold);
}

MomentSummary moment_summary(std::span<const PrecipMatrix* const> matrices, double wet_threshold) {
    return summarize(
        [&](auto&& f) {
            for (const auto* m : matrices) {
                for (float v : m->values()) {
                    f(static_cast<double>(v));
                }
            }
        },
        wet_threshold);
}

std::vector<MomentSummary> per_simulation_summaries(const SimulationSet& sims, double wet_threshold) {
    if (sims.empty()) {
        throw DataError("per-simulation summaries of an empty simulation set");
    }
    std::vector<MomentSummary> out;
    out.reserve(sims.size());
    for (const auto& r : sims.realizations()) {
        out.push_back(moment_summary(r.values.values(), wet_threshold));
    }
    return out;
}

void SpellDistribution::append(const SpellDistribution& other) {
    dry.insert(dry.end(), other.dry.begin(), other.dry.end());
    wet.insert(wet.end(), other.wet.begin(), other.wet.end());
}

SpellDistribution spell_lengths(std::span<const double> series, double wet_threshold) {
    SpellDistribution out;
    std::size_t run = 0;
    bool run_wet = false;
    for (std::size_t t = 0; t < series.size(); ++t) {
        const bool wet = series[t] >= wet_threshold;
        if (run > 0 && wet != run_wet) {
            (run_wet ? out.wet : out.dry).push_back(run);
            run = 0;
        }
        run_wet = wet;
        ++run;
    }
    if (run > 0) {
        (run_wet ? out.wet : out.dry).push_back(run);
    }
    return out;
}

SpellDistribution spell_lengths(const PrecipMatrix& values, double wet_threshold, SpellMode mode) {
    if (mode == SpellMode::Regional) {
        const auto means = regional_mean_series(values);
        return spell_lengths(means, wet_threshold);
    }
    SpellDistribution out;
    std::vector<double> series(values.days());
    for (std::size_t s = 0; s < values.sites(); ++s) {
        for (std::size_t t = 0; t < values.days(); ++t) {
            series[t] = values(t, s);
        }
        out.append(spell_lengths(series, wet_threshold));
    }
    return out;
}

namespace {

std::vector<double> as_sorted_doubles(const std::vector<std::size_t>& v) {
    std::vector<double> out(v.begin(), v.end());
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<QQPoint> qq_sorted(const std::vector<double>& a, const std::vector<double>& b,
                               std::span<const double> levels) {
    std::vector<QQPoint> out;
    for (double l : levels) {
        out.push_back({l, stats::quantile_sorted<double>(a, l), stats::quantile_sorted<double>(b, l)});
    }
    return out;
}

} // namespace

SpellQQ spell_qq(const SpellDistribution& obs, const SpellDistribution& sim, std::span<const double> levels) {
    validate_levels(levels);
    if (obs.dry.empty() || obs.wet.empty() || sim.dry.empty() || sim.wet.empty()) {
        throw DataError("spell QQ needs dry and wet spells in both observed and simulated data");
    }
    SpellQQ out;
    out.dry = qq_sorted(as_sorted_doubles(obs.dry), as_sorted_doubles(sim.dry), levels);
    out.wet = qq_sorted(as_sorted_doubles(obs.wet), as_sorted_doubles(sim.wet), levels);
    return out;
}

std::vector<DayStats> per_day_curve(const PrecipMatrix& values, const Calendar& calendar) {
    if (values.days() != calendar.day_count()) {
        throw DataError("per-day curve: values and calendar lengths differ");
    }
    std::array<std::size_t, 366> n{};
    std::array<double, 366> sum{};
    std::array<double, 366> max{};
    max.fill(-std::numeric_limits<double>::infinity());
    for (std::size_t t = 0; t < values.days(); ++t) {
        const auto d = static_cast<std::size_t>(calendar.day_of_year(t) - 1);
        for (float v : values.day(t)) {
            sum[d] += v;
            max[d] = std::max(max[d], static_cast<double>(v));
        }
        n[d] += values.sites();
    }
    std::array<double, 366> ss{};
    for (std::size_t t = 0; t < values.days(); ++t) {
        const auto d = static_cast<std::size_t>(calendar.day_of_year(t) - 1);
        const double mean = sum[d] / static_cast<double>(n[d]);
        for (float v : values.day(t)) {
            ss[d] += (v - mean) * (v - mean);
        }
    }
    std::vector<DayStats> out;
    for (std::size_t d = 0; d < 366; ++d) {
        if (n[d] == 0) {
            continue;
        }
        const double cnt = static_cast<double>(n[d]);
        out.push_back({static_cast<int>(d + 1), n[d], sum[d] / cnt, std::sqrt(ss[d] / cnt), max[d]});
    }
    return out;
}

PerDayCurves per_day_curves(const ObservationSet& obs, const SimulationSet& sims) {
    PerDayCurves c;
    c.observed = per_day_curve(obs.values(), obs.calendar());
    for (const auto& r : sims.realizations()) {
        c.simulated.push_back(per_day_curve(r.values, sims.calendar()));
    }
    return c;
}

Envelope envelope(std::span<const double> values) {
    Envelope e;
    e.count = values.size();
    if (values.empty()) {
        e.median = e.min = e.max = kNaN;
        return e;
    }
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    e.median = stats::quantile_sorted<double>(v, 0.5);
    e.min = v.front();
    e.max = v.back();
    return e;
}

namespace {

/// Site-mean total and wet percentage over a set of days; `divisor` scales the total.
PeriodValue period_value(const PrecipMatrix& values, std::span<const std::size_t> days, double divisor,
                         double wet_threshold) {
    PeriodValue p;
    p.days = days.size();
    if (days.empty()) {
        p.total = p.wet_pct = kNaN;
        return p;
    }
    double total = 0.0;
    std::size_t wet = 0;
    for (std::size_t t : days) {
        for (float v : values.day(t)) {
            total += v;
            wet += static_cast<double>(v) >= wet_threshold;
        }
    }
    const auto sites = static_cast<double>(values.sites());
    p.total = total / sites / divisor;
    p.wet_pct = 100.0 * static_cast<double>(wet) / (sites * static_cast<double>(days.size()));
    return p;
}

} // namespace

std::array<PeriodValue, 12> monthly_values(const PrecipMatrix& values, const Calendar& calendar,
                                           double wet_threshold) {
    if (values.days() != calendar.day_count()) {
        throw DataError("monthly values: values and calendar lengths differ");
    }
    std::array<std::vector<std::size_t>, 12> days;
    std::array<std::vector<int>, 12> years;
    for (std::size_t t = 0; t < calendar.day_count(); ++t) {
        const auto m = static_cast<std::size_t>(calendar.month(t) - 1);
        days[m].push_back(t);
        if (years[m].empty() || years[m].back() != calendar.year(t)) {
            years[m].push_back(calendar.year(t));
        }
    }
    std::array<PeriodValue, 12> out;
    for (std::size_t m = 0; m < 12; ++m) {
        out[m] = period_value(values, days[m], static_cast<double>(std::max<std::size_t>(years[m].size(), 1)),
                              wet_threshold);
    }
    return out;
}

std::vector<MonthlyAggregate> monthly_aggregates(const ObservationSet& obs, const SimulationSet& sims,
                                                 double wet_threshold) {
    if (!sims.empty() && sims.grid().site_count() != obs.grid().site_count()) {
        throw DataError("monthly aggregates: observed and simulated grids differ");
    }
    const auto observed = monthly_values(obs.values(), obs.calendar(), wet_threshold);
    std::array<std::vector<double>, 12> totals, wets;
    for (const auto& r : sims.realizations()) {
        const auto v = monthly_values(r.values, sims.calendar(), wet_threshold);
        for (std::size_t m = 0; m < 12; ++m) {
            if (v[m].days > 0) {
                totals[m].push_back(v[m].total);
                wets[m].push_back(v[m].wet_pct);
            }
        }
    }
    std::vector<MonthlyAggregate> out;
    for (std::size_t m = 0; m < 12; ++m) {
        out.push_back({static_cast<int>(m + 1), observed[m], envelope(totals[m]), envelope(wets[m])});
    }
    return out;
}

std::vector<std::pair<int, PeriodValue>> annual_values(const PrecipMatrix& values, const Calendar& calendar,
                                                       double wet_threshold) {
    if (values.days() != calendar.day_count()) {
        throw DataError("annual values: values and calendar lengths differ");
    }
    std::vector<std::pair<int, PeriodValue>> out;
    if (calendar.day_count() == 0) {
        return out;
    }
    for (int y = calendar.first_year(); y <= calendar.last_year(); ++y) {
        const auto [first, last] = calendar.year_range(y);
        std::vector<std::size_t> days(last - first);
        for (std::size_t t = first; t < last; ++t) {
            days[t - first] = t;
        }
        out.emplace_back(y, period_value(values, days, 1.0, wet_threshold));
    }
    return out;
}

AnnualAggregates annual_aggregates(const ObservationSet& obs, const SimulationSet& sims, double wet_threshold) {
    if (!sims.empty() && sims.grid().site_count() != obs.grid().site_count()) {
        throw DataError("annual aggregates: observed and simulated grids differ");
    }
    AnnualAggregates out;
    out.year_aligned = sims.year_aligned();
    const auto observed = annual_values(obs.values(), obs.calendar(), wet_threshold);
    std::map<int, std::pair<std::vector<double>, std::vector<double>>> by_year;
    std::vector<double> free_total, free_wet;
    for (const auto& r : sims.realizations()) {
        for (const auto& [y, v] : annual_values(r.values, sims.calendar(), wet_threshold)) {
            free_total.push_back(v.total);
            free_wet.push_back(v.wet_pct);
            if (out.year_aligned) {
                by_year[y].first.push_back(v.total);
                by_year[y].second.push_back(v.wet_pct);
            }
        }
    }
    std::vector<double> obs_total, obs_wet;
    for (const auto& [y, v] : observed) {
        AnnualAggregate a;
        a.year = y;
        a.observed = v;
        const auto it = by_year.find(y);
        if (it != by_year.end()) {
            a.sim_total = envelope(it->second.first);
            a.sim_wet_pct = envelope(it->second.second);
        } else {
            a.sim_total = envelope({});
            a.sim_wet_pct = envelope({});
        }
        obs_total.push_back(v.total);
        obs_wet.push_back(v.wet_pct);
        out.years.push_back(a);
    }
    out.observed_total_free = envelope(obs_total);
    out.observed_wet_free = envelope(obs_wet);
    out.sim_total_free = envelope(free_total);
    out.sim_wet_free = envelope(free_wet);
    return out;
}

} // namespace precipgen::metrics
