#include "precipgen/observations.hpp"

#include "precipgen/error.hpp"

#include <cmath>
#include <numeric>
#include <set>

namespace precipgen {

namespace {

template <typename T>
double mean_of(std::span<const T> values) {
    if (values.empty()) {
        throw ConfigError("regional mean of an empty field");
    }
    double sum = 0.0;
    for (T v : values) {
        sum += static_cast<double>(v);
    }
    return sum / static_cast<double>(values.size());
}

} // namespace

double regional_mean(std::span<const float> day_values) { return mean_of(day_values); }
double regional_mean(std::span<const double> day_values) { return mean_of(day_values); }

std::vector<double> regional_mean_series(const PrecipMatrix& values) {
    std::vector<double> out(values.days());
    for (std::size_t t = 0; t < values.days(); ++t) {
        out[t] = regional_mean(values.day(t));
    }
    return out;
}

void check_values(const PrecipMatrix& values, const Calendar& calendar, std::size_t days, std::size_t sites,
                  const std::string& what) {
    if (values.days() != days || values.sites() != sites) {
        throw DataError(what + ": matrix is " + std::to_string(values.days()) + "x" +
                        std::to_string(values.sites()) + ", expected " + std::to_string(days) + "x" +
                        std::to_string(sites));
    }
    for (std::size_t t = 0; t < days; ++t) {
        const auto row = values.day(t);
        for (std::size_t s = 0; s < sites; ++s) {
            const float v = row[s];
            if (!std::isfinite(v) || v < 0.0f) {
                throw DataError(what + ": invalid value " + std::to_string(v) + " on " +
                                format_date(calendar.date(t)) + " at site " + std::to_string(s));
            }
        }
    }
}

ObservationSet::ObservationSet(GridSpec grid, Calendar calendar, PrecipMatrix values)
    : grid_(grid), calendar_(std::move(calendar)), values_(std::move(values)) {
    check_values(values_, calendar_, calendar_.day_count(), grid_.site_count(), "observations");
}

SimulationSet::SimulationSet(GridSpec grid, Calendar calendar, std::string generator, std::uint64_t master_seed,
                             bool year_aligned)
    : grid_(grid),
      calendar_(std::move(calendar)),
      generator_(std::move(generator)),
      master_seed_(master_seed),
      year_aligned_(year_aligned) {}

void SimulationSet::add(Realization realization) {
    for (const auto& r : realizations_) {
        if (r.info.sim_id == realization.info.sim_id) {
            throw DataError("duplicate simulation id " + std::to_string(realization.info.sim_id));
        }
    }
    check_values(realization.values, calendar_, calendar_.day_count(), grid_.site_count(),
                 "simulation " + std::to_string(realization.info.sim_id));
    realizations_.push_back(std::move(realization));
}

void SimulationSet::validate() const {
    std::set<int> ids;
    for (const auto& r : realizations_) {
        if (!ids.insert(r.info.sim_id).second) {
            throw DataError("duplicate simulation id " + std::to_string(r.info.sim_id));
        }
        check_values(r.values, calendar_, calendar_.day_count(), grid_.site_count(),
                     "simulation " + std::to_string(r.info.sim_id));
    }
}

} // namespace precipgen
