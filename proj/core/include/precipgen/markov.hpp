#pragma once

#include "precipgen/calendar.hpp"
#include "precipgen/observations.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace precipgen::markov {

/// Regional occurrence state, ordered by precipitation magnitude.
enum class State : std::uint8_t { Dry = 0, Wet = 1, Extreme = 2 };

inline constexpr std::size_t kStates = 3;
inline constexpr std::size_t kMonths = 12;

constexpr std::size_t index(State s) noexcept { return static_cast<std::size_t>(s); }
constexpr State state_from_index(std::size_t i) noexcept { return static_cast<State>(i); }
std::string_view name(State s) noexcept;

using StateSequence = std::vector<State>;
using Matrix3 = std::array<std::array<double, kStates>, kStates>;

struct OccurrenceThresholds {
    double wet_threshold = 0.3;
    double extreme_quantile = 0.8;
    /// Per month (index 0 = January); +inf when the month had no wet day.
    std::array<double, kMonths> extreme_cutoff{};

    void validate() const;
};

/// Per-month extreme cutoffs: the `extreme_quantile` quantile (linear
/// interpolation between order statistics) of the regional means that are at
/// or above `wet_threshold` in that month.
OccurrenceThresholds fit_thresholds(const ObservationSet& obs, double wet_threshold = 0.3,
                                    double extreme_quantile = 0.8);
OccurrenceThresholds fit_thresholds(std::span<const double> regional_means, const Calendar& calendar,
                                    double wet_threshold = 0.3, double extreme_quantile = 0.8);

/// Dry below wet_threshold, Extreme at or above the month's cutoff, Wet between.
State classify_day(double regional_mean, int month, const OccurrenceThresholds& thr);

StateSequence classify_days(std::span<const double> regional_means, const Calendar& calendar,
                            const OccurrenceThresholds& thr);
StateSequence classify_days(const ObservationSet& obs, const OccurrenceThresholds& thr);

/// Twelve first-order transition matrices; row i is the distribution of
/// today's state given yesterday's state i.
struct MonthlyTransitionModel {
    std::array<Matrix3, kMonths> probability{};
    std::array<Matrix3, kMonths> counts{};
    double pseudo = 0.0;

    /// Model from given matrices (counts left at zero). Validates rows.
    static MonthlyTransitionModel from_probabilities(const std::array<Matrix3, kMonths>& p);
    /// The same matrix for every month.
    static MonthlyTransitionModel uniform_months(const Matrix3& p);

    [[nodiscard]] const Matrix3& month_matrix(int month) const { return probability.at(month - 1); }

    /// Throws ConfigError unless every row sums to 1 within 1e-12 with entries in [0, 1].
    void validate() const;
};

/// Counts pairs (t-1, t) by the month of day t; rows with no counts and no
/// smoothing fall back to uniform.
MonthlyTransitionModel fit_transitions(std::span<const State> states, const Calendar& calendar, double pseudo = 0.0);

/// states[0] is drawn from row `initial` (the state of the day before the
/// calendar starts), states[t] from row states[t-1] of month(t)'s matrix.
StateSequence simulate_states(const MonthlyTransitionModel& model, const Calendar& calendar, State initial,
                              std::uint64_t seed);

nlohmann::json to_json(const OccurrenceThresholds& thr);
OccurrenceThresholds thresholds_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MonthlyTransitionModel& model);
MonthlyTransitionModel transitions_from_json(const nlohmann::json& j);

} // namespace precipgen::markov
