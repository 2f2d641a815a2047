#include "precipgen/error.hpp"
#include "precipgen/semiparametric.hpp"
#include "precipgen/stats.hpp"
#include "precipgen/synthetic.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

using namespace precipgen;
using namespace precipgen::semiparametric;

namespace {

constexpr State D = State::Dry;
constexpr State W = State::Wet;
constexpr State E = State::Extreme;

const GridSpec kOneSite(19.0, 19.05, 72.0, 72.05, 0.05);

markov::OccurrenceThresholds no_extremes() {
    markov::OccurrenceThresholds thr;
    thr.extreme_cutoff.fill(std::numeric_limits<double>::infinity());
    return thr;
}

markov::OccurrenceThresholds fixed_cutoff(double c) {
    markov::OccurrenceThresholds thr;
    thr.extreme_cutoff.fill(c);
    return thr;
}

ObservationSet one_site(const Calendar& cal, const std::vector<float>& v) {
    return test::make_observations(kOneSite, cal, [&](std::size_t t, std::size_t) { return v.at(t); });
}

Calendar days_from(const char* start, int n) {
    const auto s = parse_date(start);
    return Calendar(s, std::chrono::sys_days(s) + std::chrono::days(n - 1));
}

ObservationSet small_oracle(int first_year, int last_year, std::uint64_t seed) {
    return synthesize_observations(monsoon_oracle_config(seed), oracle_grid(2, 2),
                                   Calendar::years(first_year, last_year));
}

} // namespace

TEST(Library, TenDaysGiveNineEntries) {
    const auto cal = days_from("2001-03-01", 10);
    const auto obs = one_site(cal, {0, 1, 2, 0, 0, 3, 0, 4, 5, 0});
    const auto lib = build_library(obs, no_extremes());
    ASSERT_EQ(lib.size(), 9u);
    for (std::size_t i = 0; i < lib.size(); ++i) {
        const auto& e = lib.entries()[i];
        EXPECT_EQ(e.source_day, i + 1);
        EXPECT_EQ(e.day_of_year, cal.day_of_year(i + 1));
        EXPECT_DOUBLE_EQ(e.prev_regional_mean, obs.values()(i, 0));
    }
    EXPECT_EQ(lib.entries()[0].prev_state, D);
    EXPECT_EQ(lib.entries()[0].state, W);
}

TEST(Library, IdenticalAmountsHaveZeroBandwidth) {
    const auto obs = one_site(days_from("2001-01-01", 6), {2, 2, 0, 2, 2, 2});
    const auto lib = build_library(obs, no_extremes());
    EXPECT_EQ(lib.cell_sample_size(0, 1, W), 5u);
    EXPECT_DOUBLE_EQ(lib.bandwidth(0, 1, W), 0.0);
}

TEST(Library, SilvermanBandwidthOfOneToFive) {
    const auto obs = one_site(days_from("2001-01-01", 7), {0, 1, 2, 3, 4, 5, 0});
    const auto lib = build_library(obs, no_extremes());
    const double sd = std::sqrt(2.5);
    const double iqr = 4.0 - 2.0;
    const double expected = 0.9 * std::min(sd, iqr / 1.34) * std::pow(5.0, -0.2);
    EXPECT_NEAR(lib.bandwidth(0, 1, W), expected, 1e-12);
    EXPECT_NEAR(expected, 0.97356, 1e-4);
    EXPECT_DOUBLE_EQ(lib.bandwidth(0, 1, E), 0.0);
}

TEST(Library, SourceAnnualTotalsScalePartialYears) {
    const auto cal = days_from("2001-12-30", 4);
    const auto obs = one_site(cal, {1, 1, 2, 2});
    const auto lib = build_library(obs, no_extremes());
    EXPECT_DOUBLE_EQ(lib.source_annual_total(lib.entries()[0]), 365.0);
    EXPECT_DOUBLE_EQ(lib.source_annual_total(lib.entries()[2]), 730.0);
}

TEST(Library, SingleDayIsRejected) {
    EXPECT_THROW(build_library(one_site(days_from("2001-01-01", 1), {1}), no_extremes()), DataError);
}

TEST(Candidates, CircularDayDistance) {
    EXPECT_EQ(circular_day_distance(3, 362), 7);
    EXPECT_EQ(circular_day_distance(1, 366), 1);
    EXPECT_EQ(circular_day_distance(100, 90), 10);
    EXPECT_EQ(circular_day_distance(5, 5), 0);
}

TEST(Candidates, WholeYearWindowAndUniquePair) {
    std::vector<float> v(366, 1.0f);
    v[200] = 50.0f;
    const auto obs = one_site(Calendar::years(2000, 2000), v);
    const auto lib = build_library(obs, fixed_cutoff(10.0));
    const auto c = knn_candidates(lib, W, E, 17, 366);
    ASSERT_EQ(c.entries.size(), 1u);
    EXPECT_EQ(c.fallback_level, 0);
    EXPECT_EQ(lib.entries()[c.entries[0]].source_day, 200u);
}

TEST(Candidates, WindowWrapsAroundTheYearEnd) {
    const auto obs = one_site(Calendar::years(2000, 2001), std::vector<float>(731, 1.0f));
    const auto lib = build_library(obs, no_extremes());
    const auto c = knn_candidates(lib, W, W, 3, 7);
    EXPECT_EQ(c.fallback_level, 0);
    std::set<int> doys;
    for (auto id : c.entries) {
        doys.insert(lib.entries()[id].day_of_year);
    }
    for (int d : {362, 363, 364, 365, 366, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10}) {
        EXPECT_TRUE(doys.count(d)) << d;
    }
    EXPECT_EQ(doys.size(), 15u);
    EXPECT_FALSE(doys.count(361));
    EXPECT_FALSE(doys.count(11));
}

TEST(Candidates, FallbackWhenThePairIsAbsent) {
    std::vector<float> v(366, 1.0f);
    v[100] = 50.0f;
    const auto obs = one_site(Calendar::years(2000, 2000), v);
    const auto lib = build_library(obs, fixed_cutoff(10.0));
    const auto near = knn_candidates(lib, E, E, 102, 7);
    EXPECT_EQ(near.fallback_level, 1);
    ASSERT_FALSE(near.entries.empty());
    const auto far = knn_candidates(lib, E, E, 300, 7);
    EXPECT_EQ(far.fallback_level, 2);
    ASSERT_EQ(far.entries.size(), 1u);
    EXPECT_EQ(lib.entries()[far.entries[0]].state, E);
    EXPECT_THROW(knn_candidates(lib, W, D, 10, 7), DataError);
}

namespace {

struct RankFixture {
    ObservationSet obs = one_site(days_from("2001-05-01", 6), {0, 1, 5, 1, 50, 1});
    ResampleLibrary lib = build_library(obs, no_extremes());
    std::vector<std::uint32_t> ids{0, 2, 4};
};

} // namespace

TEST(Selection, BruteForceRankingWithoutAnnualTerm) {
    RankFixture f;
    SelectionQuery q;
    q.prev_sim_regional_mean = 4.9;
    q.annual_weight = 0.0;
    q.target_annual = 1000.0;
    const auto ranked = rank_candidates(f.lib, f.ids, q);
    std::vector<double> order;
    for (const auto& r : ranked) {
        order.push_back(f.lib.entries()[r.entry].prev_regional_mean);
    }
    std::vector<std::pair<double, double>> brute;
    for (double m : {0.0, 5.0, 50.0}) {
        brute.emplace_back(std::abs(m - 4.9), m);
    }
    std::sort(brute.begin(), brute.end());
    ASSERT_EQ(order.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_DOUBLE_EQ(order[i], brute[i].second);
    }
    EXPECT_EQ(order, (std::vector<double>{5.0, 0.0, 50.0}));
    EXPECT_NEAR(ranked[0].distance, 0.1, 1e-12);
}

TEST(Selection, AnnualTermAddsScaledTotalDistance) {
    RankFixture f;
    SelectionQuery q;
    q.prev_sim_regional_mean = 5.0;
    q.annual_weight = 2.0;
    q.days_in_year = 365;
    const double src = f.lib.source_annual_total(f.lib.entries()[2]);
    q.target_annual = src + 365.0;
    const auto ranked = rank_candidates(f.lib, f.ids, q);
    EXPECT_EQ(ranked[0].entry, 2u);
    EXPECT_NEAR(ranked[0].distance, 2.0, 1e-12);
}

TEST(Selection, HarmonicWeights) {
    const auto w2 = harmonic_weights(2);
    EXPECT_NEAR(w2[0], 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(w2[1], 1.0 / 3.0, 1e-15);
    const auto w4 = harmonic_weights(4);
    const double h4 = 1.0 + 0.5 + 1.0 / 3.0 + 0.25;
    EXPECT_NEAR(w4[3], 0.25 / h4, 1e-15);
    EXPECT_EQ(effective_k(0, 10), 4u);
    EXPECT_EQ(effective_k(0, 9), 3u);
    EXPECT_EQ(effective_k(7, 3), 3u);
    EXPECT_EQ(effective_k(0, 1), 1u);
}

TEST(Selection, KOneAlwaysTakesTheNearest) {
    RankFixture f;
    SelectionQuery q;
    q.prev_sim_regional_mean = 4.9;
    q.k = 1;
    q.annual_weight = 0.0;
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        EXPECT_EQ(knn_select(f.lib, f.ids, q, rng), 2u);
    }
}

TEST(Selection, KTwoFollowsRankWeights) {
    RankFixture f;
    SelectionQuery q;
    q.prev_sim_regional_mean = 4.9;
    q.k = 2;
    q.annual_weight = 0.0;
    Rng rng(4);
    const int n = 60000;
    int first = 0;
    int second = 0;
    for (int i = 0; i < n; ++i) {
        const auto id = knn_select(f.lib, f.ids, q, rng);
        first += id == 2u;
        second += id == 0u;
    }
    EXPECT_EQ(first + second, n);
    EXPECT_NEAR(static_cast<double>(first) / n, 2.0 / 3.0, 0.01);
}

TEST(Selection, TiesAreBrokenWithoutPositionalBias) {
    const auto obs = one_site(days_from("2001-05-01", 9), {0, 1, 0, 1, 0, 1, 0, 1, 0});
    const auto lib = build_library(obs, no_extremes());
    const std::vector<std::uint32_t> ids{0, 2, 4, 6};
    SelectionQuery q;
    q.k = 1;
    q.annual_weight = 0.0;
    Rng rng(5);
    std::array<int, 4> hits{};
    const int n = 40000;
    for (int i = 0; i < n; ++i) {
        const auto id = knn_select(lib, ids, q, rng);
        hits[id / 2] += 1;
    }
    for (int h : hits) {
        EXPECT_NEAR(static_cast<double>(h) / n, 0.25, 0.01);
    }
}

TEST(Selection, EmptyCandidatesAreRejected) {
    RankFixture f;
    Rng rng(1);
    EXPECT_THROW(knn_select(f.lib, std::span<const std::uint32_t>{}, SelectionQuery{}, rng), DataError);
}

TEST(Kde, ReflectionAtZero) {
    const std::vector<float> in{2.0f};
    const std::vector<double> h{1.0};
    EXPECT_FLOAT_EQ(kde_perturb(in, h, -3.0)[0], 1.0f);
    EXPECT_FLOAT_EQ(kde_perturb(in, h, 0.5)[0], 2.5f);
}

TEST(Kde, ZeroBandwidthsAreTheIdentity) {
    const std::vector<float> in{0.0f, 1.5f, 30.0f};
    const std::vector<double> h(3, 0.0);
    EXPECT_EQ(kde_perturb(in, h, 2.7), in);
}

TEST(Kde, DrySitesStayDry) {
    const std::vector<float> in{0.0f, 4.0f};
    const std::vector<double> h{5.0, 5.0};
    const auto out = kde_perturb(in, h, 1.0);
    EXPECT_EQ(out[0], 0.0f);
    EXPECT_FLOAT_EQ(out[1], 9.0f);
}

TEST(Kde, SharedEpsilonPreservesSiteRanks) {
    const std::vector<float> in{1.0f, 3.0f, 7.0f, 12.0f};
    const std::vector<double> h(4, 0.8);
    for (double eps : {-1.0, -0.3, 0.0, 0.9, 2.5}) {
        const auto out = kde_perturb(in, h, eps);
        EXPECT_TRUE(std::is_sorted(out.begin(), out.end())) << eps;
    }
}

TEST(Kde, LengthMismatchIsRejected) {
    EXPECT_THROW(kde_perturb(std::vector<float>{1.0f}, std::vector<double>{1.0, 2.0}, 0.0), ConfigError);
}

TEST(Config, ValidationAndJsonRoundTrip) {
    SemiParamConfig c;
    c.k = 5;
    c.window = 10;
    c.annual_weight = 0.5;
    c.annual_target = AnnualTarget::Forecast;
    c.annual_innovations = false;
    c.kde = false;
    c.pseudo = 0.25;
    c.arima_order = {2, 0, 1};
    const auto back = config_from_json(to_json(c));
    EXPECT_EQ(back.k, 5u);
    EXPECT_EQ(back.window, 10);
    EXPECT_DOUBLE_EQ(back.annual_weight, 0.5);
    EXPECT_EQ(back.annual_target, AnnualTarget::Forecast);
    EXPECT_FALSE(back.annual_innovations);
    EXPECT_FALSE(back.kde);
    EXPECT_EQ(back.arima_order, (arima::ArimaOrder{2, 0, 1}));

    SemiParamConfig bad;
    bad.window = -1;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = {};
    bad.annual_weight = -0.1;
    EXPECT_THROW(bad.validate(), ConfigError);
    auto j = to_json(SemiParamConfig{});
    j["annual_target"] = "hindcast";
    EXPECT_THROW(config_from_json(j), ConfigError);
}

TEST(Simulate, FiftyRealizationsOverTwentyNineYears) {
    const auto obs = small_oracle(1981, 2009, 21);
    const auto sims = simulate(obs, SemiParamConfig{}, 50, 7);
    ASSERT_EQ(sims.size(), 50u);
    for (std::size_t r = 0; r < sims.size(); ++r) {
        EXPECT_EQ(sims[r].info.sim_id, static_cast<int>(r + 1));
        EXPECT_EQ(sims[r].info.seed, derive_seed(7, r));
        EXPECT_EQ(sims[r].values.days(), 10592u);
        EXPECT_EQ(sims[r].values.sites(), 4u);
    }
    EXPECT_TRUE(sims.year_aligned());
    EXPECT_EQ(sims.generator(), kGeneratorName);
}

TEST(Simulate, SeedDeterminismAndJobIndependence) {
    const auto obs = small_oracle(1991, 2000, 22);
    const auto model = fit(obs, SemiParamConfig{});
    const auto a = simulate(model, obs.calendar(), 4, 11, 1);
    const auto b = simulate(model, obs.calendar(), 4, 11, 1);
    const auto c = simulate(model, obs.calendar(), 4, 11, 3);
    const auto d = simulate(model, obs.calendar(), 4, 12, 1);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, c);
    EXPECT_NE(a, d);
}

TEST(Simulate, WithoutKdeEveryDayIsAnExactHistoricalCopy) {
    const auto obs = small_oracle(1991, 2000, 23);
    SemiParamConfig cfg;
    cfg.kde = false;
    const auto model = fit(obs, cfg);
    RealizationTrace trace;
    const auto real = simulate_realization(model, obs.calendar(), 1, 99, &trace);
    ASSERT_EQ(trace.source_day.size(), obs.day_count());
    for (std::size_t t = 1; t < obs.day_count(); ++t) {
        const auto src = trace.source_day[t];
        for (std::size_t s = 0; s < obs.site_count(); ++s) {
            ASSERT_EQ(real.values(t, s), obs.values()(src, s)) << t << "," << s;
        }
    }
    EXPECT_EQ(trace.diagnostics.days, obs.day_count());
}

TEST(Simulate, KdeKeepsDryDaysDryAndValuesNonnegative) {
    const auto obs = small_oracle(1991, 2000, 24);
    const auto model = fit(obs, SemiParamConfig{});
    RealizationTrace trace;
    const auto real = simulate_realization(model, obs.calendar(), 1, 5, &trace);
    for (std::size_t t = 1; t < obs.day_count(); ++t) {
        const auto src = trace.source_day[t];
        for (std::size_t s = 0; s < obs.site_count(); ++s) {
            EXPECT_GE(real.values(t, s), 0.0f);
            if (obs.values()(src, s) == 0.0f) {
                EXPECT_EQ(real.values(t, s), 0.0f);
            }
        }
    }
}

TEST(Simulate, ReconstructTargetsFollowTheObservedTotals) {
    const auto obs = small_oracle(1981, 2000, 25);
    const auto model = fit(obs, SemiParamConfig{});
    ASSERT_TRUE(model.arima.has_value());
    RealizationTrace trace;
    (void)simulate_realization(model, Calendar::years(1981, 2003), 1, 3, &trace);
    ASSERT_EQ(trace.target_annual.size(), 23u);
    for (std::size_t y = 0; y < 20; ++y) {
        EXPECT_NEAR(trace.target_annual[y], model.observed_annual.totals[y], 1e-9);
    }
    for (std::size_t y = 20; y < 23; ++y) {
        EXPECT_TRUE(std::isfinite(trace.target_annual[y]));
        EXPECT_GE(trace.target_annual[y], 0.0);
    }
}

TEST(Simulate, ForecastTargetsWithoutInnovationsAreOneStepProjections) {
    const auto obs = small_oracle(1981, 2000, 26);
    SemiParamConfig cfg;
    cfg.annual_target = AnnualTarget::Forecast;
    cfg.annual_innovations = false;
    const auto model = fit(obs, cfg);
    RealizationTrace trace;
    (void)simulate_realization(model, obs.calendar(), 1, 3, &trace);
    const auto& totals = model.observed_annual.totals;
    for (std::size_t y = 1; y < totals.size(); ++y) {
        const std::span<const double> history(totals.data(), y);
        EXPECT_NEAR(trace.target_annual[y], std::max(0.0, arima::project_annual_total(*model.arima, history)), 1e-9);
    }
}

TEST(Simulate, AnnualConditioningNeedsEnoughYears) {
    const auto obs = small_oracle(1991, 1994, 27);
    EXPECT_THROW(fit(obs, SemiParamConfig{}), DataError);
    SemiParamConfig off;
    off.annual_weight = 0.0;
    const auto model = fit(obs, off);
    EXPECT_FALSE(model.arima.has_value());
    const auto sims = simulate(model, obs.calendar(), 2, 1);
    EXPECT_EQ(sims.size(), 2u);
}

TEST(Simulate, ZeroRealizationsAreRejected) {
    const auto obs = small_oracle(1991, 2000, 28);
    EXPECT_THROW(simulate(obs, SemiParamConfig{}, 0, 1), ConfigError);
}
