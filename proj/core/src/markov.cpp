#include "precipgen/markov.hpp"

#include "precipgen/error.hpp"
#include "precipgen/random.hpp"
#include "precipgen/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace precipgen::markov {

std::string_view name(State s) noexcept {
    switch (s) {
        case State::Dry:
            return "dry";
        case State::Wet:
            return "wet";
        case State::Extreme:
            return "extreme";
    }
    return "?";
}

void OccurrenceThresholds::validate() const {
    if (!(wet_threshold > 0.0) || !std::isfinite(wet_threshold)) {
        throw ConfigError("wet_threshold must be positive");
    }
    if (!(extreme_quantile > 0.0 && extreme_quantile < 1.0)) {
        throw ConfigError("extreme_quantile must lie in (0, 1)");
    }
    for (std::size_t m = 0; m < kMonths; ++m) {
        if (!(extreme_cutoff[m] >= wet_threshold)) {
            throw ConfigError("extreme cutoff of month " + std::to_string(m + 1) + " is below wet_threshold");
        }
    }
}

OccurrenceThresholds fit_thresholds(std::span<const double> regional_means, const Calendar& calendar,
                                    double wet_threshold, double extreme_quantile) {
    OccurrenceThresholds thr;
    thr.wet_threshold = wet_threshold;
    thr.extreme_quantile = extreme_quantile;
    thr.extreme_cutoff.fill(wet_threshold);
    // Validate parameters before the data pass.
    thr.validate();
    if (regional_means.empty() || regional_means.size() != calendar.day_count()) {
        throw ConfigError("fit_thresholds: series must be nonempty and match the calendar");
    }
    std::array<std::vector<double>, kMonths> wet;
    for (std::size_t t = 0; t < regional_means.size(); ++t) {
        if (regional_means[t] >= wet_threshold) {
            wet[calendar.month(t) - 1].push_back(regional_means[t]);
        }
    }
    for (std::size_t m = 0; m < kMonths; ++m) {
        auto& v = wet[m];
        if (v.empty()) {
            thr.extreme_cutoff[m] = std::numeric_limits<double>::infinity();
            continue;
        }
        std::sort(v.begin(), v.end());
        thr.extreme_cutoff[m] = stats::quantile_sorted(std::span<const double>(v), extreme_quantile);
    }
    return thr;
}

OccurrenceThresholds fit_thresholds(const ObservationSet& obs, double wet_threshold, double extreme_quantile) {
    const auto means = regional_mean_series(obs.values());
    return fit_thresholds(means, obs.calendar(), wet_threshold, extreme_quantile);
}

State classify_day(double regional_mean, int month, const OccurrenceThresholds& thr) {
    if (regional_mean < thr.wet_threshold) {
        return State::Dry;
    }
    if (regional_mean >= thr.extreme_cutoff.at(month - 1)) {
        return State::Extreme;
    }
    return State::Wet;
}

StateSequence classify_days(std::span<const double> regional_means, const Calendar& calendar,
                            const OccurrenceThresholds& thr) {
    StateSequence out(regional_means.size());
    for (std::size_t t = 0; t < regional_means.size(); ++t) {
        out[t] = classify_day(regional_means[t], calendar.month(t), thr);
    }
    return out;
}

StateSequence classify_days(const ObservationSet& obs, const OccurrenceThresholds& thr) {
    const auto means = regional_mean_series(obs.values());
    return classify_days(means, obs.calendar(), thr);
}

void MonthlyTransitionModel::validate() const {
    for (std::size_t m = 0; m < kMonths; ++m) {
        for (std::size_t i = 0; i < kStates; ++i) {
            double sum = 0.0;
            for (double p : probability[m][i]) {
                if (!(p >= 0.0 && p <= 1.0)) {
                    throw ConfigError("transition probability outside [0, 1] in month " + std::to_string(m + 1));
                }
                sum += p;
            }
            if (std::abs(sum - 1.0) > 1e-12) {
                throw ConfigError("transition row " + std::string(name(state_from_index(i))) + " of month " +
                                  std::to_string(m + 1) + " sums to " + std::to_string(sum));
            }
        }
    }
    if (!(pseudo >= 0.0)) {
        throw ConfigError("smoothing pseudo-count must be nonnegative");
    }
}

MonthlyTransitionModel MonthlyTransitionModel::from_probabilities(const std::array<Matrix3, kMonths>& p) {
    MonthlyTransitionModel model;
    model.probability = p;
    model.validate();
    return model;
}

MonthlyTransitionModel MonthlyTransitionModel::uniform_months(const Matrix3& p) {
    std::array<Matrix3, kMonths> all;
    all.fill(p);
    return from_probabilities(all);
}

MonthlyTransitionModel fit_transitions(std::span<const State> states, const Calendar& calendar, double pseudo) {
    if (states.size() < 2) {
        throw ConfigError("fit_transitions: state sequence must have at least 2 days");
    }
    if (states.size() != calendar.day_count()) {
        throw ConfigError("fit_transitions: state sequence does not match the calendar");
    }
    if (!(pseudo >= 0.0) || !std::isfinite(pseudo)) {
        throw ConfigError("smoothing pseudo-count must be nonnegative");
    }
    MonthlyTransitionModel model;
    model.pseudo = pseudo;
    for (std::size_t t = 1; t < states.size(); ++t) {
        model.counts[calendar.month(t) - 1][index(states[t - 1])][index(states[t])] += 1.0;
    }
    for (std::size_t m = 0; m < kMonths; ++m) {
        for (std::size_t i = 0; i < kStates; ++i) {
            const auto& c = model.counts[m][i];
            const double total = c[0] + c[1] + c[2] + 3.0 * pseudo;
            for (std::size_t j = 0; j < kStates; ++j) {
                model.probability[m][i][j] = total > 0.0 ? (c[j] + pseudo) / total : 1.0 / 3.0;
            }
            // Keep the row sum exact: fold rounding into the largest entry.
            auto& row = model.probability[m][i];
            const double sum = row[0] + row[1] + row[2];
            auto largest = std::max_element(row.begin(), row.end());
            *largest += 1.0 - sum;
        }
    }
    return model;
}

StateSequence simulate_states(const MonthlyTransitionModel& model, const Calendar& calendar, State initial,
                              std::uint64_t seed) {
    Rng rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    StateSequence out(calendar.day_count());
    State prev = initial;
    for (std::size_t t = 0; t < out.size(); ++t) {
        const auto& row = model.probability[calendar.month(t) - 1][index(prev)];
        const double u = unif(rng);
        std::size_t next = kStates - 1;
        double acc = 0.0;
        for (std::size_t j = 0; j < kStates; ++j) {
            acc += row[j];
            if (u < acc) {
                next = j;
                break;
            }
        }
        // Zero-probability trailing states are never selected by rounding.
        while (next > 0 && row[next] == 0.0) {
            --next;
        }
        out[t] = state_from_index(next);
        prev = out[t];
    }
    return out;
}

namespace {

nlohmann::json matrix_json(const Matrix3& m) {
    auto rows = nlohmann::json::array();
    for (const auto& r : m) {
        rows.push_back({r[0], r[1], r[2]});
    }
    return rows;
}

Matrix3 matrix_from_json(const nlohmann::json& j) {
    Matrix3 m{};
    if (!j.is_array() || j.size() != kStates) {
        throw DataError("transition matrix must be 3x3");
    }
    for (std::size_t i = 0; i < kStates; ++i) {
        if (!j[i].is_array() || j[i].size() != kStates) {
            throw DataError("transition matrix must be 3x3");
        }
        for (std::size_t k = 0; k < kStates; ++k) {
            m[i][k] = j[i][k].get<double>();
        }
    }
    return m;
}

} // namespace

nlohmann::json to_json(const OccurrenceThresholds& thr) {
    auto cut = nlohmann::json::array();
    for (double c : thr.extreme_cutoff) {
        // JSON has no infinity; an unreachable Extreme state is recorded as null.
        cut.push_back(std::isinf(c) ? nlohmann::json(nullptr) : nlohmann::json(c));
    }
    return {{"wet_threshold", thr.wet_threshold}, {"extreme_quantile", thr.extreme_quantile}, {"extreme_cutoff", cut}};
}

OccurrenceThresholds thresholds_from_json(const nlohmann::json& j) {
    try {
        OccurrenceThresholds thr;
        thr.wet_threshold = j.at("wet_threshold").get<double>();
        thr.extreme_quantile = j.at("extreme_quantile").get<double>();
        const auto& cut = j.at("extreme_cutoff");
        if (cut.size() != kMonths) {
            throw DataError("extreme_cutoff must have 12 entries");
        }
        for (std::size_t m = 0; m < kMonths; ++m) {
            thr.extreme_cutoff[m] = cut[m].is_null() ? std::numeric_limits<double>::infinity() : cut[m].get<double>();
        }
        thr.validate();
        return thr;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("invalid thresholds: ") + e.what());
    } catch (const ConfigError& e) {
        throw DataError(std::string("invalid thresholds: ") + e.what());
    }
}

nlohmann::json to_json(const MonthlyTransitionModel& model) {
    auto months = nlohmann::json::array();
    for (std::size_t m = 0; m < kMonths; ++m) {
        months.push_back({{"month", m + 1},
                          {"probability", matrix_json(model.probability[m])},
                          {"counts", matrix_json(model.counts[m])}});
    }
    return {{"states", {"dry", "wet", "extreme"}}, {"pseudo", model.pseudo}, {"months", months}};
}

MonthlyTransitionModel transitions_from_json(const nlohmann::json& j) {
    try {
        MonthlyTransitionModel model;
        model.pseudo = j.at("pseudo").get<double>();
        const auto& months = j.at("months");
        if (months.size() != kMonths) {
            throw DataError("transition model must have 12 months");
        }
        for (std::size_t m = 0; m < kMonths; ++m) {
            model.probability[m] = matrix_from_json(months[m].at("probability"));
            model.counts[m] = matrix_from_json(months[m].at("counts"));
        }
        model.validate();
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("invalid transition model: ") + e.what());
    } catch (const ConfigError& e) {
        throw DataError(std::string("invalid transition model: ") + e.what());
    }
}

} // namespace precipgen::markov
