#pragma once

#include "precipgen/markov.hpp"
#include "precipgen/observations.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace precipgen {

struct GammaParams {
    double shape = 1.0;
    double scale = 1.0; // mm/day
};

/// Parameters of the synthetic precipitation process used as a test oracle.
///
/// A regional state chain is drawn from the per-month matrices. On Wet and
/// Extreme days every site receives Gamma(shape, scale) of the state, coupled
/// across sites through a Gaussian latent factor: z_i = sqrt(c) Z + sqrt(1-c) e_i,
/// amount_i = F^-1(Phi(z_i)). Each calendar year's amounts are multiplied by
/// max(0.05, 1 + a_y) where a_y is a stationary Gaussian AR(1) with
/// coefficient `annual_ar_coefficient` and standard deviation
/// `annual_modulation_sd`.
struct SyntheticOracleConfig {
    std::array<markov::Matrix3, markov::kMonths> transitions{};
    /// Indexed by state; the Dry entry is unused.
    std::array<GammaParams, markov::kStates> amounts{};
    double inter_site_correlation = 0.0;
    double annual_ar_coefficient = 0.0;
    double annual_modulation_sd = 0.0;
    markov::State initial = markov::State::Dry;
    std::uint64_t seed = 0;

    /// Throws ConfigError on invalid rows, gamma parameters, correlation
    /// outside [0, 1] or |AR coefficient| >= 1.
    void validate() const;
};

struct SyntheticTruth {
    ObservationSet observations;
    markov::StateSequence states;
    /// a_y per calendar year, first year first.
    std::vector<double> annual_modulation;
};

/// Pure function of (config, grid, calendar).
ObservationSet synthesize_observations(const SyntheticOracleConfig& config, const GridSpec& grid,
                                       const Calendar& calendar);

/// Same draw as synthesize_observations, also exposing the latent state path
/// and annual modulation.
SyntheticTruth synthesize_with_truth(const SyntheticOracleConfig& config, const GridSpec& grid,
                                     const Calendar& calendar);

/// A monsoon-like default: long dry season, persistent wet season, Extreme
/// days only in the wet months.
SyntheticOracleConfig monsoon_oracle_config(std::uint64_t seed);

/// Strongly persistent regimes: each month has one dominant state whose row
/// is visited most days, so its transition probabilities are tightly
/// identified from a few decades.
SyntheticOracleConfig persistent_oracle_config(std::uint64_t seed);

/// Weakly persistent weather with low-variance amounts under a strong annual
/// AR(1) modulation (coefficient 0.6, sd 0.4), so annual totals are dominated
/// by the annual process.
SyntheticOracleConfig interannual_oracle_config(std::uint64_t seed);

/// A small grid of `n_lat` x `n_lon` sites at 0.05 degrees anchored at 19N 72E.
GridSpec oracle_grid(std::size_t n_lat, std::size_t n_lon);

} // namespace precipgen
