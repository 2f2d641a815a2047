#pragma once

#include "precipgen/arima.hpp"
#include "precipgen/markov.hpp"
#include "precipgen/observations.hpp"
#include "precipgen/random.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace precipgen::semiparametric {

using markov::State;

/// One historical day t >= 1 available for resampling.
struct LibraryEntry {
    State prev_state = State::Dry;
    State state = State::Dry;
    int day_of_year = 1;
    double prev_regional_mean = 0.0; // mm/day, day t - 1
    int source_year = 0;
    std::uint32_t source_day = 0; // index into the training observations
};

/// Historical days indexed by (state pair, day of year) plus per-cell KDE
/// bandwidths.
class ResampleLibrary {
public:
    ResampleLibrary() = default;

    [[nodiscard]] const std::vector<LibraryEntry>& entries() const noexcept { return entries_; }
    [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
    [[nodiscard]] bool empty() const noexcept { return entries_.empty(); }
    [[nodiscard]] std::size_t site_count() const noexcept { return sites_; }

    /// Silverman bandwidth, mm/day, of the positive amounts at `site` on days
    /// of `month` in `state`.
    [[nodiscard]] double bandwidth(std::size_t site, int month, State state) const;
    [[nodiscard]] std::span<const double> bandwidths(int month, State state) const;
    [[nodiscard]] std::size_t cell_sample_size(std::size_t site, int month, State state) const;

    /// Annual total (mm/year, regional mean) of an entry's source year; partial
    /// years are scaled to a full year.
    [[nodiscard]] double source_annual_total(const LibraryEntry& e) const;

    /// Entries of one (prev, current, day of year) bucket.
    [[nodiscard]] std::span<const std::uint32_t> pair_bucket(State prev, State cur, int day_of_year) const;
    [[nodiscard]] std::span<const std::uint32_t> state_bucket(State cur, int day_of_year) const;

private:
    friend ResampleLibrary build_library(const ObservationSet& obs, const markov::OccurrenceThresholds& thr);

    std::vector<LibraryEntry> entries_;
    std::size_t sites_ = 0;
    std::vector<double> bandwidth_;        // [(month-1) * 3 + state][site]
    std::vector<std::uint32_t> cell_n_;    // same layout
    int first_year_ = 0;
    std::vector<double> year_total_;       // by year - first_year_
    std::vector<std::vector<std::uint32_t>> pair_buckets_;  // [pair * 366 + doy - 1]
    std::vector<std::vector<std::uint32_t>> state_buckets_; // [state * 366 + doy - 1]
};

/// Requires at least two days; one entry for every day t >= 1.
ResampleLibrary build_library(const ObservationSet& obs, const markov::OccurrenceThresholds& thr);

/// Circular day-of-year distance on a 366-day cycle.
int circular_day_distance(int a, int b) noexcept;

struct CandidateSet {
    std::vector<std::uint32_t> entries; // indices into library.entries()
    /// 0: matching state pair within the window; 1: matching current state
    /// within the window; 2: matching current state over the whole year.
    int fallback_level = 0;
};

/// Throws DataError when no historical day has the current state.
CandidateSet knn_candidates(const ResampleLibrary& library, State prev, State cur, int day_of_year, int window);

struct RankedCandidate {
    std::uint32_t entry = 0;
    double distance = 0.0;
};

struct SelectionQuery {
    double prev_sim_regional_mean = 0.0; // mm/day
    std::size_t k = 0;                   // 0 = ceil(sqrt(#candidates))
    double annual_weight = 1.0;          // lambda
    std::optional<double> target_annual; // mm/year; no annual term when empty
    int days_in_year = 365;
};

/// Candidates ordered by distance |prev mean - query| + lambda |A_src - A_target| / days_in_year,
/// ties broken by source day.
std::vector<RankedCandidate> rank_candidates(const ResampleLibrary& library, std::span<const std::uint32_t> candidates,
                                             const SelectionQuery& query);

/// Rank weights (1/j) / sum_{i<=k} (1/i), j = 1..k.
std::vector<double> harmonic_weights(std::size_t k);

std::size_t effective_k(std::size_t requested, std::size_t n_candidates) noexcept;

/// Samples one of the k nearest candidates; returns its library entry index.
/// Equal distances are ordered by a random rotation of the candidate list.
std::uint32_t knn_select(const ResampleLibrary& library, std::span<const std::uint32_t> candidates,
                         const SelectionQuery& query, Rng& rng);

/// out[i] = |in[i] + h[i] * eps| for in[i] > 0; zero sites stay zero.
std::vector<float> kde_perturb(std::span<const float> field, std::span<const double> bandwidths, double eps);

/// Draws one shared standard normal eps and perturbs by the (month, state)
/// bandwidths. Dry days pass through unchanged.
std::vector<float> kde_perturb(std::span<const float> field, int month, State state, const ResampleLibrary& library,
                               Rng& rng);

/// Annual target for years inside the observed record: the observed total
/// (ARIMA path replaying the fitted residuals) or the one-step forecast from
/// the preceding observed years. Years past the record are always forecast.
enum class AnnualTarget { Reconstruct, Forecast };

struct SemiParamConfig {
    std::size_t k = 0;      // 0 = automatic
    int window = 7;         // day-of-year half-width
    double annual_weight = 1.0;
    AnnualTarget annual_target = AnnualTarget::Reconstruct;
    bool annual_innovations = true; // sampled ARIMA innovation added to forecast targets
    bool kde = true;
    double wet_threshold = 0.3;
    double extreme_quantile = 0.8;
    double pseudo = 0.0;
    arima::ArimaOrder arima_order{1, 0, 0};

    void validate() const;
};

/// Fitted artifacts plus the training data they index.
struct SemiParamModel {
    SemiParamConfig config;
    ObservationSet observations;
    markov::OccurrenceThresholds thresholds;
    markov::StateSequence observed_states;
    markov::MonthlyTransitionModel transitions;
    std::optional<arima::ArimaModel> arima; // absent only when annual_weight == 0 and too few years
    arima::AnnualTotals observed_annual;
    ResampleLibrary library;
};

SemiParamModel fit(const ObservationSet& obs, const SemiParamConfig& config);

struct SimulationDiagnostics {
    std::size_t days = 0;
    std::array<std::size_t, 3> fallback_counts{}; // by fallback level
    /// Days whose source day's observed state differs from the simulated state.
    std::size_t state_mismatches = 0;
};

struct RealizationTrace {
    std::vector<std::uint32_t> source_day;  // per simulated day
    std::vector<double> target_annual;      // per simulated year (NaN without ARIMA)
    SimulationDiagnostics diagnostics;
};

/// One realization over `calendar` from an already derived seed.
Realization simulate_realization(const SemiParamModel& model, const Calendar& calendar, int sim_id,
                                 std::uint64_t seed, RealizationTrace* trace = nullptr);

/// n_sims independent realizations with seeds derive_seed(master_seed, r),
/// sim ids 1..n_sims. `jobs` threads; output independent of jobs.
SimulationSet simulate(const SemiParamModel& model, const Calendar& calendar, std::size_t n_sims,
                       std::uint64_t master_seed, unsigned jobs = 1, SimulationDiagnostics* totals = nullptr);

/// fit + simulate over the observed calendar.
SimulationSet simulate(const ObservationSet& obs, const SemiParamConfig& config, std::size_t n_sims,
                       std::uint64_t master_seed, unsigned jobs = 1);

inline constexpr const char* kGeneratorName = "semiparametric";

nlohmann::json to_json(const SemiParamConfig& c);
SemiParamConfig config_from_json(const nlohmann::json& j);
/// Summary of the library: entry counts per state pair and the bandwidth table.
nlohmann::json library_summary(const ResampleLibrary& library);

} // namespace precipgen::semiparametric
