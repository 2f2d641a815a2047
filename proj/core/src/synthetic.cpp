#include "precipgen/synthetic.hpp"

#include "precipgen/error.hpp"
#include "precipgen/random.hpp"
#include "precipgen/stats.hpp"

#include <algorithm>
#include <cmath>

namespace precipgen {

using markov::State;

namespace {
constexpr double kMinModulation = 0.05;
} // namespace

void SyntheticOracleConfig::validate() const {
    // Row checks are shared with the transition model.
    (void)markov::MonthlyTransitionModel::from_probabilities(transitions);
    for (std::size_t s = 1; s < markov::kStates; ++s) {
        if (!(amounts[s].shape > 0.0) || !(amounts[s].scale > 0.0)) {
            throw ConfigError("gamma amount parameters must be positive");
        }
    }
    if (!(inter_site_correlation >= 0.0 && inter_site_correlation <= 1.0)) {
        throw ConfigError("inter-site correlation must lie in [0, 1]");
    }
    if (!(std::abs(annual_ar_coefficient) < 1.0)) {
        throw ConfigError("|annual AR(1) coefficient| must be < 1");
    }
    if (!(annual_modulation_sd >= 0.0)) {
        throw ConfigError("annual modulation sd must be nonnegative");
    }
}

SyntheticTruth synthesize_with_truth(const SyntheticOracleConfig& config, const GridSpec& grid,
                                     const Calendar& calendar) {
    config.validate();
    const auto model = markov::MonthlyTransitionModel::from_probabilities(config.transitions);
    // Independent streams for the chain, the amounts and the annual process.
    auto states = markov::simulate_states(model, calendar, config.initial, derive_seed(config.seed, 0));
    Rng amount_rng(derive_seed(config.seed, 1));
    Rng annual_rng(derive_seed(config.seed, 2));
    std::normal_distribution<double> normal(0.0, 1.0);

    const int n_years = calendar.day_count() ? calendar.year_count() : 0;
    std::vector<double> mod(static_cast<std::size_t>(n_years), 0.0);
    const double phi = config.annual_ar_coefficient;
    const double sd = config.annual_modulation_sd;
    for (int y = 0; y < n_years; ++y) {
        const double e = normal(annual_rng);
        mod[y] = y == 0 ? sd * e : phi * mod[y - 1] + sd * std::sqrt(1.0 - phi * phi) * e;
    }

    const std::size_t sites = grid.site_count();
    PrecipMatrix values(calendar.day_count(), sites);
    const double c = config.inter_site_correlation;
    const double shared_w = std::sqrt(c);
    const double own_w = std::sqrt(1.0 - c);
    std::vector<double> own(sites);
    for (std::size_t t = 0; t < calendar.day_count(); ++t) {
        // Draws happen on every day so that the amount stream does not depend
        // on the state path.
        const double z0 = normal(amount_rng);
        for (auto& e : own) {
            e = normal(amount_rng);
        }
        const State s = states[t];
        if (s == State::Dry) {
            continue;
        }
        const auto& g = config.amounts[markov::index(s)];
        const double mult = std::max(kMinModulation, 1.0 + mod[calendar.year(t) - calendar.first_year()]);
        auto row = values.day(t);
        for (std::size_t i = 0; i < sites; ++i) {
            const double z = shared_w * z0 + own_w * own[i];
            const double u = std::clamp(stats::normal_cdf(z), 1e-12, 1.0 - 1e-12);
            row[i] = static_cast<float>(mult * stats::gamma_quantile(g.shape, g.scale, u));
        }
    }
    return {ObservationSet(grid, calendar, std::move(values)), std::move(states), std::move(mod)};
}

ObservationSet synthesize_observations(const SyntheticOracleConfig& config, const GridSpec& grid,
                                       const Calendar& calendar) {
    return synthesize_with_truth(config, grid, calendar).observations;
}

SyntheticOracleConfig monsoon_oracle_config(std::uint64_t seed) {
    using M = markov::Matrix3;
    const M dry_season{{{0.80, 0.18, 0.02}, {0.45, 0.50, 0.05}, {0.40, 0.50, 0.10}}};
    const M shoulder{{{0.70, 0.25, 0.05}, {0.35, 0.55, 0.10}, {0.25, 0.55, 0.20}}};
    const M monsoon{{{0.45, 0.45, 0.10}, {0.15, 0.65, 0.20}, {0.10, 0.55, 0.35}}};
    SyntheticOracleConfig cfg;
    for (int m = 1; m <= 12; ++m) {
        const bool wet_months = m >= 6 && m <= 9;
        const bool shoulder_months = m == 5 || m == 10;
        cfg.transitions[m - 1] = wet_months ? monsoon : (shoulder_months ? shoulder : dry_season);
    }
    cfg.amounts[markov::index(State::Wet)] = {0.8, 8.0};
    cfg.amounts[markov::index(State::Extreme)] = {2.0, 20.0};
    cfg.inter_site_correlation = 0.7;
    cfg.annual_ar_coefficient = 0.6;
    cfg.annual_modulation_sd = 0.25;
    cfg.seed = seed;
    return cfg;
}

SyntheticOracleConfig persistent_oracle_config(std::uint64_t seed) {
    using M = markov::Matrix3;
    const M dry_season{{{0.97, 0.025, 0.005}, {0.80, 0.17, 0.03}, {0.60, 0.30, 0.10}}};
    const M monsoon{{{0.10, 0.85, 0.05}, {0.03, 0.92, 0.05}, {0.05, 0.75, 0.20}}};
    SyntheticOracleConfig cfg;
    for (int m = 1; m <= 12; ++m) {
        cfg.transitions[m - 1] = (m >= 6 && m <= 9) ? monsoon : dry_season;
    }
    cfg.amounts[markov::index(State::Wet)] = {0.8, 8.0};
    cfg.amounts[markov::index(State::Extreme)] = {2.0, 20.0};
    cfg.inter_site_correlation = 0.7;
    cfg.seed = seed;
    return cfg;
}

SyntheticOracleConfig interannual_oracle_config(std::uint64_t seed) {
    const markov::Matrix3 regular{{{0.20, 0.70, 0.10}, {0.20, 0.70, 0.10}, {0.20, 0.65, 0.15}}};
    SyntheticOracleConfig cfg;
    cfg.transitions.fill(regular);
    cfg.amounts[markov::index(State::Wet)] = {4.0, 2.0};
    cfg.amounts[markov::index(State::Extreme)] = {6.0, 4.0};
    cfg.inter_site_correlation = 0.1;
    cfg.annual_ar_coefficient = 0.6;
    cfg.annual_modulation_sd = 0.4;
    cfg.seed = seed;
    return cfg;
}

GridSpec oracle_grid(std::size_t n_lat, std::size_t n_lon) {
    constexpr double res = 0.05;
    return GridSpec(19.0, 19.0 + res * static_cast<double>(n_lat), 72.0, 72.0 + res * static_cast<double>(n_lon),
                    res);
}

} // namespace precipgen
