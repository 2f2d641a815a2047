#include "precipgen/metrics.hpp"
#include "precipgen/random.hpp"
#include "precipgen/semiparametric.hpp"
#include "precipgen/stats.hpp"
#include "precipgen/synthetic.hpp"
#include "precipgen/wilks.hpp"

#include <benchmark/benchmark.h>

#include <vector>

using namespace precipgen;

namespace {

const semiparametric::SemiParamModel& model_2x2() {
    static const auto m = semiparametric::fit(
        synthesize_observations(monsoon_oracle_config(1), oracle_grid(2, 2), Calendar::years(1981, 2010)), {});
    return m;
}

void BM_KnnSelect(benchmark::State& state) {
    const auto& m = model_2x2();
    const auto cand = semiparametric::knn_candidates(m.library, markov::State::Wet, markov::State::Wet, 200, 7);
    semiparametric::SelectionQuery q;
    q.prev_sim_regional_mean = 6.0;
    q.target_annual = 1500.0;
    Rng rng(1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(semiparametric::knn_select(m.library, cand.entries, q, rng));
    }
    state.counters["candidates"] = static_cast<double>(cand.entries.size());
}
BENCHMARK(BM_KnnSelect);

void BM_SemiparametricRealization(benchmark::State& state) {
    const auto& m = model_2x2();
    const auto cal = m.observations.calendar();
    std::uint64_t seed = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(semiparametric::simulate_realization(m, cal, 1, ++seed));
    }
}
BENCHMARK(BM_SemiparametricRealization)->Unit(benchmark::kMillisecond);

void BM_BivariateNormalCdf(benchmark::State& state) {
    const double rho = static_cast<double>(state.range(0)) / 100.0;
    double h = -1.5;
    for (auto _ : state) {
        benchmark::DoNotOptimize(stats::bivariate_normal_cdf(h, 0.3, rho));
        h = h > 1.5 ? -1.5 : h + 0.01;
    }
}
BENCHMARK(BM_BivariateNormalCdf)->Arg(20)->Arg(60)->Arg(90)->Arg(98);

void BM_CalibratePair(benchmark::State& state) {
    std::vector<wilks::PairConfiguration> configs;
    for (int m = 0; m < 48; ++m) {
        configs.push_back({1.0 + m, 0.1 + 0.015 * m, 0.15 + 0.012 * m});
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(wilks::calibrate_pair(configs, 0.45));
    }
}
BENCHMARK(BM_CalibratePair)->Unit(benchmark::kMicrosecond);

void BM_PooledQuantiles(benchmark::State& state) {
    Rng rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<float> values(static_cast<std::size_t>(state.range(0)));
    for (auto& v : values) {
        v = u(rng) < 0.6 ? 0.0f : static_cast<float>(30.0 * u(rng));
    }
    const auto levels = metrics::default_levels();
    for (auto _ : state) {
        metrics::PooledSample s;
        s.add(values);
        s.finalize();
        double acc = 0.0;
        for (double l : levels) {
            acc += s.quantile(l);
        }
        benchmark::DoNotOptimize(acc);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PooledQuantiles)->Arg(1 << 16)->Arg(1 << 20)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
