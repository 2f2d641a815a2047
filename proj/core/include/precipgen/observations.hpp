#pragma once

#include "precipgen/calendar.hpp"
#include "precipgen/grid.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace precipgen {

/// Daily precipitation, mm/day, stored [day][site] row-major. Values are
/// single precision, the native precision of gridded precipitation products.
class PrecipMatrix {
public:
    using value_type = float;

    PrecipMatrix() = default;
    PrecipMatrix(std::size_t days, std::size_t sites, float fill = 0.0f)
        : days_(days), sites_(sites), data_(days * sites, fill) {}

    [[nodiscard]] std::size_t days() const noexcept { return days_; }
    [[nodiscard]] std::size_t sites() const noexcept { return sites_; }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

    float& operator()(std::size_t day, std::size_t site) noexcept { return data_[day * sites_ + site]; }
    float operator()(std::size_t day, std::size_t site) const noexcept { return data_[day * sites_ + site]; }

    [[nodiscard]] std::span<float> day(std::size_t t) noexcept { return {data_.data() + t * sites_, sites_}; }
    [[nodiscard]] std::span<const float> day(std::size_t t) const noexcept {
        return {data_.data() + t * sites_, sites_};
    }

    [[nodiscard]] std::span<const float> values() const noexcept { return data_; }
    [[nodiscard]] std::span<float> values() noexcept { return data_; }

    friend bool operator==(const PrecipMatrix&, const PrecipMatrix&) = default;

private:
    std::size_t days_ = 0;
    std::size_t sites_ = 0;
    std::vector<float> data_;
};

/// Arithmetic mean over sites of one day's field. Throws ConfigError on empty input.
double regional_mean(std::span<const float> day_values);
double regional_mean(std::span<const double> day_values);

/// Regional mean of every day of a matrix.
std::vector<double> regional_mean_series(const PrecipMatrix& values);

/// Gridded observed precipitation; immutable after construction.
class ObservationSet {
public:
    ObservationSet() = default;
    /// Validates shape, finiteness and nonnegativity; throws DataError.
    ObservationSet(GridSpec grid, Calendar calendar, PrecipMatrix values);

    [[nodiscard]] const GridSpec& grid() const noexcept { return grid_; }
    [[nodiscard]] const Calendar& calendar() const noexcept { return calendar_; }
    [[nodiscard]] const PrecipMatrix& values() const noexcept { return values_; }
    [[nodiscard]] std::size_t day_count() const noexcept { return values_.days(); }
    [[nodiscard]] std::size_t site_count() const noexcept { return values_.sites(); }

    friend bool operator==(const ObservationSet&, const ObservationSet&) = default;

private:
    GridSpec grid_;
    Calendar calendar_;
    PrecipMatrix values_;
};

struct RealizationInfo {
    int sim_id = 0;
    std::uint64_t seed = 0;
    std::string generator;

    friend bool operator==(const RealizationInfo&, const RealizationInfo&) = default;
};

struct Realization {
    RealizationInfo info;
    PrecipMatrix values;

    friend bool operator==(const Realization&, const Realization&) = default;
};

/// Collection of simulated fields sharing one grid and calendar.
class SimulationSet {
public:
    SimulationSet() = default;
    SimulationSet(GridSpec grid, Calendar calendar, std::string generator, std::uint64_t master_seed,
                  bool year_aligned = true);

    /// Throws DataError on shape mismatch, duplicate sim_id or invalid values.
    void add(Realization realization);

    [[nodiscard]] const GridSpec& grid() const noexcept { return grid_; }
    [[nodiscard]] const Calendar& calendar() const noexcept { return calendar_; }
    [[nodiscard]] const std::string& generator() const noexcept { return generator_; }
    [[nodiscard]] std::uint64_t master_seed() const noexcept { return master_seed_; }
    /// False for realizations that do not correspond to specific calendar years.
    [[nodiscard]] bool year_aligned() const noexcept { return year_aligned_; }

    [[nodiscard]] const std::vector<Realization>& realizations() const noexcept { return realizations_; }
    [[nodiscard]] std::size_t size() const noexcept { return realizations_.size(); }
    [[nodiscard]] bool empty() const noexcept { return realizations_.empty(); }
    [[nodiscard]] const Realization& operator[](std::size_t i) const { return realizations_.at(i); }

    /// Checks every invariant (used before writing sets assembled elsewhere).
    void validate() const;

    friend bool operator==(const SimulationSet&, const SimulationSet&) = default;

private:
    GridSpec grid_;
    Calendar calendar_;
    std::string generator_;
    std::uint64_t master_seed_ = 0;
    bool year_aligned_ = true;
    std::vector<Realization> realizations_;
};

/// Checks a matrix for the ObservationSet value invariants; throws DataError
/// naming the first offending (day, site).
void check_values(const PrecipMatrix& values, const Calendar& calendar, std::size_t days, std::size_t sites,
                  const std::string& what);

} // namespace precipgen
