// Acceptance checks P1-P10. One PASS/FAIL line per criterion; exit status 1
// when any criterion fails or none ran.

#include "precipgen/arima.hpp"
#include "precipgen/cli/commands.hpp"
#include "precipgen/glm.hpp"
#include "precipgen/hash.hpp"
#include "precipgen/io.hpp"
#include "precipgen/markov.hpp"
#include "precipgen/metrics.hpp"
#include "precipgen/report.hpp"
#include "precipgen/semiparametric.hpp"
#include "precipgen/stats.hpp"
#include "precipgen/synthetic.hpp"
#include "precipgen/wilks.hpp"
#include "support.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace precipgen;
namespace fs = std::filesystem;
using markov::State;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
    std::vector<std::string> info;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

int failures = 0;
int executed = 0;
std::set<std::string> selected;

void run(const std::string& id, double limit_seconds, const std::function<Outcome()>& check) {
    if (!selected.empty() && !selected.count(id)) {
        return;
    }
    ++executed;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what(), {}};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = limit_seconds <= 0.0 || secs < limit_seconds;
    const bool pass = o.pass && in_time;
    failures += pass ? 0 : 1;
    std::string timing = limit_seconds > 0.0 ? fmt("%.1f s, limit %.0f s", secs, limit_seconds) : fmt("%.1f s", secs);
    if (!in_time) {
        timing += ", over time";
    }
    std::printf("%s %s %s [%s]\n", id.c_str(), pass ? "PASS" : "FAIL", o.detail.c_str(), timing.c_str());
    for (const auto& line : o.info) {
        std::printf("   info: %s\n", line.c_str());
    }
    std::fflush(stdout);
}

Calendar days_from(const char* start, std::size_t n) {
    const auto s = parse_date(start);
    return Calendar(s, CivilDate{std::chrono::sys_days{s} + std::chrono::days{static_cast<long>(n) - 1}});
}

double max_transition_error(const markov::MonthlyTransitionModel& fitted,
                            const std::array<markov::Matrix3, markov::kMonths>& truth, std::size_t min_visits,
                            std::size_t& rows) {
    double worst = 0.0;
    rows = 0;
    for (std::size_t m = 0; m < markov::kMonths; ++m) {
        for (std::size_t i = 0; i < markov::kStates; ++i) {
            const auto& c = fitted.counts[m][i];
            if (c[0] + c[1] + c[2] < static_cast<double>(min_visits)) {
                continue;
            }
            ++rows;
            for (std::size_t j = 0; j < markov::kStates; ++j) {
                worst = std::max(worst, std::abs(fitted.probability[m][i][j] - truth[m][i][j]));
            }
        }
    }
    return worst;
}

// P1

Outcome check_p1() {
    const auto cfg = persistent_oracle_config(1000);
    const auto cal = Calendar::years(1981, 2010);
    const auto truth = synthesize_with_truth(cfg, oracle_grid(2, 2), cal);
    const auto fitted = markov::fit_transitions(truth.states, cal, 0.0);
    std::size_t rows = 0;
    const double worst = max_transition_error(fitted, cfg.transitions, 100, rows);

    const auto thr = markov::fit_thresholds(truth.observations);
    const auto observed = markov::fit_transitions(markov::classify_days(truth.observations, thr), cal, 0.0);
    std::size_t obs_rows = 0;
    const double obs_worst = max_transition_error(observed, cfg.transitions, 100, obs_rows);

    Outcome o;
    o.pass = rows > 0 && worst <= 0.05;
    o.detail = fmt("max |p_hat - p| %.4f over %zu rows with >= 100 visits (tolerance 0.05)", worst, rows);
    o.info.push_back(fmt("states reclassified from the observations by fitted thresholds: max error %.4f over %zu rows",
                         obs_worst, obs_rows));
    return o;
}

// P2, P3

struct MonsoonRun {
    ObservationSet obs;
    SimulationSet kde_off;
    SimulationSet kde_on;
};

const MonsoonRun& monsoon_run() {
    static const MonsoonRun r = [] {
        const auto cal = Calendar::years(1981, 2010);
        auto obs = synthesize_observations(monsoon_oracle_config(1000), oracle_grid(2, 2), cal);
        semiparametric::SemiParamConfig off;
        off.kde = false;
        semiparametric::SemiParamConfig on;
        auto a = semiparametric::simulate(obs, off, 20, 77);
        auto b = semiparametric::simulate(obs, on, 20, 77);
        return MonsoonRun{std::move(obs), std::move(a), std::move(b)};
    }();
    return r;
}

struct Fidelity {
    double qq_rel = 0.0;
    double qq_level = 0.0;
    double wet_gap = 0.0;
};

Fidelity fidelity(const ObservationSet& obs, const SimulationSet& sims) {
    std::vector<double> levels;
    for (int i = 5; i <= 95; ++i) {
        levels.push_back(i / 100.0);
    }
    Fidelity f;
    for (const auto& p : metrics::pooled_qq(obs, sims, levels)) {
        if (p.observed > 1.0) {
            const double rel = std::abs(p.simulated - p.observed) / p.observed;
            if (rel > f.qq_rel) {
                f.qq_rel = rel;
                f.qq_level = p.level;
            }
        }
    }
    for (const auto& m : metrics::monthly_aggregates(obs, sims, 0.3)) {
        f.wet_gap = std::max(f.wet_gap, std::abs(m.sim_wet_pct.median - m.observed.wet_pct) / 100.0);
    }
    return f;
}

Outcome check_p2() {
    const auto& r = monsoon_run();
    std::set<std::vector<float>> observed_days;
    const auto& ov = r.obs.values();
    for (std::size_t t = 0; t < ov.days(); ++t) {
        const auto d = ov.day(t);
        observed_days.emplace(d.begin(), d.end());
    }
    std::size_t copies = 0;
    std::size_t total = 0;
    for (const auto& real : r.kde_off.realizations()) {
        for (std::size_t t = 0; t < real.values.days(); ++t) {
            const auto d = real.values.day(t);
            copies += observed_days.count(std::vector<float>(d.begin(), d.end()));
            ++total;
        }
    }
    const auto f = fidelity(r.obs, r.kde_off);
    const auto g = fidelity(r.obs, r.kde_on);
    Outcome o;
    o.pass = copies == total && f.qq_rel <= 0.10 && f.wet_gap <= 0.03 && r.kde_off.size() == 20;
    o.detail = fmt("(a) %zu/%zu simulated days are observed days; (b) max QQ relative error %.3f at level %.2f "
                   "(tolerance 0.10); (c) max monthly wet-fraction gap %.4f (tolerance 0.03); KDE off, 20 realizations",
                   copies, total, f.qq_rel, f.qq_level, f.wet_gap);
    o.info.push_back(fmt("KDE on: max QQ relative error %.3f at level %.2f, max monthly wet-fraction gap %.4f", g.qq_rel,
                         g.qq_level, g.wet_gap));
    return o;
}

std::pair<double, double> spell_gaps(const ObservationSet& obs, const SimulationSet& sims) {
    const auto all = metrics::default_levels();
    const std::vector<double> levels(all.begin(), all.begin() + 95);
    const auto os = metrics::spell_lengths(obs.values(), 0.3, metrics::SpellMode::Regional);
    metrics::SpellDistribution ss;
    for (const auto& r : sims.realizations()) {
        ss.append(metrics::spell_lengths(r.values, 0.3, metrics::SpellMode::Regional));
    }
    const auto q = metrics::spell_qq(os, ss, levels);
    double dry = 0.0, wet = 0.0;
    for (const auto& p : q.dry) {
        dry = std::max(dry, std::abs(p.observed - p.simulated));
    }
    for (const auto& p : q.wet) {
        wet = std::max(wet, std::abs(p.observed - p.simulated));
    }
    return {dry, wet};
}

Outcome check_p3() {
    const auto& r = monsoon_run();
    const auto [dry, wet] = spell_gaps(r.obs, r.kde_on);
    const auto [dry_off, wet_off] = spell_gaps(r.obs, r.kde_off);
    Outcome o;
    o.pass = dry <= 2.0 && wet <= 2.0;
    o.detail = fmt("max spell QQ gap dry %.2f, wet %.2f days at levels 1%%-95%% (tolerance 2), regional series, KDE on",
                   dry, wet);
    o.info.push_back(fmt("KDE off: dry %.2f, wet %.2f days", dry_off, wet_off));
    o.info.push_back("uses the P2 realizations; their simulation time is counted under P2");
    return o;
}

// P4

Outcome check_p4() {
    const auto cal = Calendar::years(1701, 2000);
    const auto obs = synthesize_observations(interannual_oracle_config(1000), oracle_grid(3, 3), cal);
    auto correlation = [&](double lambda, double& phi) {
        semiparametric::SemiParamConfig c;
        c.annual_weight = lambda;
        const auto model = semiparametric::fit(obs, c);
        phi = model.arima ? model.arima->ar.at(0) : std::nan("");
        const auto sims = semiparametric::simulate(model, cal, 20, 77);
        const auto ann = metrics::annual_aggregates(obs, sims, 0.3);
        std::vector<double> o, s;
        for (const auto& y : ann.years) {
            o.push_back(y.observed.total);
            s.push_back(y.sim_total.median);
        }
        return stats::pearson(o, s);
    };
    double phi = 0.0, phi0 = 0.0;
    const double c1 = correlation(1.0, phi);
    const double c0 = correlation(0.0, phi0);
    Outcome o;
    o.pass = phi >= 0.45 && phi <= 0.75 && c1 >= 0.5 && c0 < 0.3;
    o.detail = fmt("phi_hat %.3f (range 0.45-0.75); corr(observed, median simulated annual totals) %.3f at lambda=1 "
                   "(>= 0.5), %.3f at lambda=0 (< 0.3); 300 years, 20 realizations",
                   phi, c1, c0);
    return o;
}

// P5

ObservationSet wilks_oracle(const Calendar& cal, std::uint64_t seed) {
    constexpr std::size_t n = 5;
    Eigen::MatrixXd occ_corr(n, n), amt_corr(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double d = std::abs(static_cast<double>(i) - static_cast<double>(j));
            occ_corr(i, j) = std::pow(0.8, d);
            amt_corr(i, j) = std::pow(0.6, d);
        }
    }
    const Eigen::MatrixXd lo = occ_corr.llt().matrixL();
    const Eigen::MatrixXd la = amt_corr.llt().matrixL();
    Rng rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    const auto grid = oracle_grid(1, n);
    PrecipMatrix values(cal.day_count(), n);
    std::vector<bool> prev(n, false);
    Eigen::VectorXd e(n);
    for (std::size_t t = 0; t < cal.day_count(); ++t) {
        const int m = cal.month(t);
        for (auto& v : e) v = z(rng);
        const Eigen::VectorXd w = lo * e;
        for (auto& v : e) v = z(rng);
        const Eigen::VectorXd a = la * e;
        for (std::size_t s = 0; s < n; ++s) {
            const double p01 = 0.12 + 0.1 * (1.0 + std::sin(2.0 * std::numbers::pi * (m - 1) / 12.0)) + 0.02 * s;
            const double p = prev[s] ? std::min(0.9, p01 + 0.35) : p01;
            const bool wet = stats::normal_cdf(w(static_cast<Eigen::Index>(s))) <= p;
            if (wet) {
                const double u = stats::normal_cdf(a(static_cast<Eigen::Index>(s)));
                values(t, s) = static_cast<float>(0.3 + stats::gamma_quantile(0.75, 6.0 + s + 0.5 * m, u));
            }
            prev[s] = wet;
        }
    }
    return ObservationSet(grid, cal, std::move(values));
}

Outcome check_p5() {
    const auto cal = days_from("1981-01-01", 10000);
    const auto obs = wilks_oracle(cal, 5);
    const auto model = wilks::fit(obs, wilks::WilksConfig{});
    const auto sim = wilks::simulate_realization(model, cal, 1, derive_seed(77, 1));
    const auto observed = wilks::binary_correlation_matrix(glm::occurrence(obs.values(), 0.3));
    const auto simulated = wilks::binary_correlation_matrix(glm::occurrence(sim.values, 0.3));
    double corr_gap = 0.0;
    std::size_t pairs = 0;
    for (Eigen::Index i = 0; i < 5; ++i) {
        for (Eigen::Index j = i + 1; j < 5; ++j) {
            corr_gap = std::max(corr_gap, std::abs(simulated(i, j) - observed(i, j)));
            ++pairs;
        }
    }

    const auto long_cal = Calendar::years(1601, 1960);
    glm::Occurrence all_wet{long_cal.day_count(), 5, std::vector<std::uint8_t>(long_cal.day_count() * 5, 1)};
    const auto amounts =
        wilks::simulate_amounts(all_wet, long_cal, model.amounts.marginals, model.amount_factor, derive_seed(77, 2));
    std::vector<std::vector<double>> cells(5 * 12);
    for (std::size_t t = 0; t < long_cal.day_count(); ++t) {
        for (std::size_t s = 0; s < 5; ++s) {
            cells[s * 12 + static_cast<std::size_t>(long_cal.month(t) - 1)].push_back(amounts(t, s));
        }
    }
    double ks = 0.0;
    std::size_t min_draws = cells.front().size();
    for (std::size_t s = 0; s < 5; ++s) {
        for (int m = 1; m <= 12; ++m) {
            const auto& c = cells[s * 12 + static_cast<std::size_t>(m - 1)];
            min_draws = std::min(min_draws, c.size());
            ks = std::max(ks, stats::ks_statistic(c, [&](double x) { return model.amounts.marginals.cdf(s, m, x); }));
        }
    }
    Outcome o;
    o.pass = pairs == 10 && corr_gap <= 0.05 && ks < 0.05 && min_draws >= 10000;
    o.detail = fmt("max |simulated - observed| binary correlation %.4f over %zu pairs at %zu days (tolerance 0.05); "
                   "max KS %.4f over 60 site-month cells, >= %zu draws each (< 0.05)",
                   corr_gap, pairs, cal.day_count(), ks, min_draws);
    o.info.push_back(fmt("calibration max residual %.2e, clamped pairs %zu", model.occurrence_correlation.max_abs_residual,
                         model.occurrence_correlation.clamped_pairs));
    return o;
}

// P6

Outcome check_p6() {
    const std::size_t sites = 9;
    const auto cal = Calendar::years(1991, 1995);
    Rng rng(6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> p01(sites * 12), p11(sites * 12);
    for (std::size_t i = 0; i < p01.size(); ++i) {
        p01[i] = 0.02 + 0.6 * u(rng);
        p11[i] = 0.05 + 0.9 * u(rng);
    }
    std::vector<bool> prev(sites, false);
    PrecipMatrix values(cal.day_count(), sites);
    for (std::size_t t = 0; t < cal.day_count(); ++t) {
        for (std::size_t s = 0; s < sites; ++s) {
            const std::size_t cell = s * 12 + static_cast<std::size_t>(cal.month(t) - 1);
            const bool wet = u(rng) < (prev[s] ? p11[cell] : p01[cell]);
            values(t, s) = wet ? static_cast<float>(0.3 + 20.0 * u(rng)) : 0.0f;
            prev[s] = wet;
        }
    }
    const ObservationSet obs(oracle_grid(3, 3), cal, std::move(values));
    const double pseudo = 0.5;
    const auto model = glm::fit_glm_occurrence(obs, 0.3, pseudo);
    std::vector<std::size_t> order(model.cells.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(100);
    double worst = 0.0;
    std::size_t logistic = 0;
    for (const auto k : order) {
        const auto& c = model.cells[k];
        logistic += c.method == 0;
        const auto closed = glm::closed_form(c.counts, pseudo);
        worst = std::max({worst, std::abs(glm::logistic(c.beta0) - closed.p01),
                          std::abs(glm::logistic(c.beta0 + c.beta1) - closed.p11), std::abs(c.p01 - closed.p01),
                          std::abs(c.p11 - closed.p11)});
    }
    Outcome o;
    o.pass = logistic == 100 && worst <= 1e-8;
    o.detail = fmt("max |logistic - smoothed frequency| %.2e over %zu logistic site-month fits (tolerance 1e-8)", worst,
                   logistic);
    return o;
}

// P7

Outcome check_p7() {
    const auto r = wilks::calibrate_pair(0.5, 0.5, 0.4);
    const double expected = std::sin(0.2 * std::numbers::pi);
    Outcome o;
    o.pass = std::abs(r.omega - expected) <= 0.01;
    o.detail = fmt("omega %.6f vs sin(0.2 pi) = %.6f (tolerance 0.01)", r.omega, expected);
    return o;
}

// P8

struct Checker {
    std::size_t checks = 0;
    std::size_t failed = 0;
    std::string first;

    void expect(bool ok, const std::string& what) {
        ++checks;
        if (!ok && failed++ == 0) {
            first = what;
        }
    }
    void near(double a, double b, double tol, const std::string& what) {
        const bool ok = (std::isnan(a) && std::isnan(b)) || std::abs(a - b) <= tol * std::max(1.0, std::abs(b));
        expect(ok, what + fmt(" (%.17g vs %.17g)", a, b));
    }
};

std::vector<double> as_doubles(std::span<const float> v) {
    return {v.begin(), v.end()};
}

void check_sample(Checker& ck, Rng& rng, int sample) {
    std::uniform_int_distribution<int> n_days(1, 60), n_sites(1, 4), n_sims(1, 3), start_doy(0, 3000);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::size_t days = static_cast<std::size_t>(n_days(rng));
    const std::size_t sites = static_cast<std::size_t>(n_sites(rng));
    const std::size_t realizations = static_cast<std::size_t>(n_sims(rng));
    const double dry_p = u(rng);
    const auto start = CivilDate{std::chrono::sys_days{parse_date("1990-01-01")} + std::chrono::days{start_doy(rng)}};
    const Calendar cal(start, CivilDate{std::chrono::sys_days{start} + std::chrono::days{static_cast<long>(days) - 1}});
    const auto grid = oracle_grid(1, sites);
    auto draw = [&] {
        PrecipMatrix m(days, sites);
        for (auto& v : m.values()) {
            const double x = u(rng);
            v = x < dry_p ? (u(rng) < 0.2 ? 0.1f : 0.0f) : static_cast<float>(std::round(40.0 * u(rng)) / 4.0);
        }
        return m;
    };
    const ObservationSet obs(grid, cal, draw());
    SimulationSet sims(grid, cal, "oracle", 1);
    for (std::size_t r = 0; r < realizations; ++r) {
        sims.add(Realization{{static_cast<int>(r + 1), 0, "oracle"}, draw()});
    }
    const std::string tag = fmt("sample %d", sample);

    // Quantiles.
    std::vector<double> levels;
    for (int i = 0; i < 7; ++i) {
        levels.push_back(0.01 + 0.98 * u(rng));
    }
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    const auto ov = as_doubles(obs.values().values());
    std::vector<double> sv;
    for (const auto& r : sims.realizations()) {
        const auto v = as_doubles(r.values.values());
        sv.insert(sv.end(), v.begin(), v.end());
    }
    const auto qq = metrics::pooled_qq(obs, sims, levels);
    for (std::size_t i = 0; i < levels.size(); ++i) {
        ck.near(qq[i].observed, test::brute_quantile(ov, levels[i]), 1e-12, tag + " observed quantile");
        ck.near(qq[i].simulated, test::brute_quantile(sv, levels[i]), 1e-12, tag + " simulated quantile");
        if (i > 0) {
            ck.expect(qq[i].observed >= qq[i - 1].observed, tag + " quantiles nondecreasing");
        }
    }
    for (const auto& p : metrics::pooled_qq(ov, ov, levels)) {
        ck.expect(p.observed == p.simulated, tag + " self QQ diagonal");
    }

    // Moments.
    const auto ms = metrics::moment_summary(std::span<const double>(ov), 0.3);
    const auto bm = test::brute_moments(ov);
    ck.expect(ms.n == ov.size(), tag + " moment n");
    ck.near(ms.mean, bm.mean, 1e-9, tag + " mean");
    ck.near(ms.sd, bm.sd, 1e-9, tag + " sd");
    if (bm.sd > 1e-6) {
        ck.expect(ms.skewness.has_value() && ms.kurtosis.has_value(), tag + " shape moments present");
        if (ms.skewness && ms.kurtosis) {
            ck.near(*ms.skewness, bm.skewness, 1e-7, tag + " skewness");
            ck.near(*ms.kurtosis, bm.kurtosis, 1e-7, tag + " kurtosis");
        }
    }
    const auto wet = static_cast<std::size_t>(std::count_if(ov.begin(), ov.end(), [](double v) { return v >= 0.3; }));
    ck.expect(ms.wet_count == wet && ms.wet_count + ms.dry_count == ms.n, tag + " wet/dry counts");
    ck.near(ms.max, *std::max_element(ov.begin(), ov.end()), 0.0, tag + " max");

    const auto per_sim = metrics::per_simulation_summaries(sims, 0.3);
    ck.expect(per_sim.size() == realizations, tag + " one summary per realization");
    std::vector<const PrecipMatrix*> mats;
    for (const auto& r : sims.realizations()) {
        mats.push_back(&r.values);
    }
    const auto pooled = metrics::moment_summary(std::span<const PrecipMatrix* const>(mats), 0.3);
    double lo = 1e300, hi = -1e300;
    for (std::size_t r = 0; r < per_sim.size(); ++r) {
        const auto bm_r = test::brute_moments(as_doubles(sims[r].values.values()));
        ck.near(per_sim[r].mean, bm_r.mean, 1e-9, tag + " per-simulation mean");
        lo = std::min(lo, per_sim[r].mean);
        hi = std::max(hi, per_sim[r].mean);
    }
    ck.expect(pooled.mean >= lo - 1e-12 && pooled.mean <= hi + 1e-12, tag + " pooled mean within per-simulation range");

    // Spells, per site and regional.
    auto check_spells = [&](const std::vector<double>& series, const metrics::SpellDistribution& got) {
        std::vector<bool> w;
        for (double v : series) {
            w.push_back(v >= 0.3);
        }
        ck.expect(got.dry == test::brute_runs(w, false), tag + " dry spells");
        ck.expect(got.wet == test::brute_runs(w, true), tag + " wet spells");
        const auto total = std::accumulate(got.dry.begin(), got.dry.end(), std::size_t{0}) +
                           std::accumulate(got.wet.begin(), got.wet.end(), std::size_t{0});
        ck.expect(total == series.size(), tag + " spells sum to the series length");
        const auto diff = static_cast<long>(got.dry.size()) - static_cast<long>(got.wet.size());
        ck.expect(diff >= -1 && diff <= 1, tag + " spells alternate");
    };
    metrics::SpellDistribution per_site_brute;
    for (std::size_t s = 0; s < sites; ++s) {
        std::vector<double> series(days);
        for (std::size_t t = 0; t < days; ++t) {
            series[t] = obs.values()(t, s);
        }
        const auto got = metrics::spell_lengths(series, 0.3);
        check_spells(series, got);
        per_site_brute.append(got);
    }
    const auto per_site = metrics::spell_lengths(obs.values(), 0.3, metrics::SpellMode::PerSite);
    ck.expect(per_site.dry == per_site_brute.dry && per_site.wet == per_site_brute.wet, tag + " per-site pooling");
    std::vector<double> regional(days);
    for (std::size_t t = 0; t < days; ++t) {
        double sum = 0.0;
        for (std::size_t s = 0; s < sites; ++s) {
            sum += obs.values()(t, s);
        }
        regional[t] = sum / static_cast<double>(sites);
    }
    check_spells(regional, metrics::spell_lengths(obs.values(), 0.3, metrics::SpellMode::Regional));

    // Per-day curves.
    const auto curve = metrics::per_day_curve(obs.values(), cal);
    std::map<int, std::vector<double>> by_doy;
    for (std::size_t t = 0; t < days; ++t) {
        for (std::size_t s = 0; s < sites; ++s) {
            by_doy[cal.day_of_year(t)].push_back(obs.values()(t, s));
        }
    }
    ck.expect(curve.size() == by_doy.size(), tag + " per-day coverage");
    double weighted = 0.0;
    std::size_t cells = 0;
    for (const auto& d : curve) {
        const auto it = by_doy.find(d.day_of_year);
        if (it == by_doy.end()) {
            ck.expect(false, tag + " unexpected day of year");
            continue;
        }
        const auto bmd = test::brute_moments(it->second);
        ck.expect(d.n == it->second.size(), tag + " per-day count");
        ck.near(d.mean, bmd.mean, 1e-9, tag + " per-day mean");
        ck.near(d.sd, bmd.sd, 1e-9, tag + " per-day sd");
        ck.near(d.max, *std::max_element(it->second.begin(), it->second.end()), 0.0, tag + " per-day max");
        weighted += d.mean * static_cast<double>(d.n);
        cells += d.n;
    }
    ck.near(weighted / static_cast<double>(cells), bm.mean, 1e-9, tag + " per-day weighted mean equals pooled mean");

    // Monthly and annual aggregates.
    const auto monthly = metrics::monthly_values(obs.values(), cal, 0.3);
    for (int m = 1; m <= 12; ++m) {
        std::set<int> years;
        double total = 0.0;
        std::size_t wet_cells = 0, month_days = 0;
        for (std::size_t t = 0; t < days; ++t) {
            if (cal.month(t) != m) {
                continue;
            }
            years.insert(cal.year(t));
            ++month_days;
            for (std::size_t s = 0; s < sites; ++s) {
                total += obs.values()(t, s);
                wet_cells += obs.values()(t, s) >= 0.3f;
            }
        }
        const auto& got = monthly[static_cast<std::size_t>(m - 1)];
        ck.expect(got.days == month_days, tag + " monthly day count");
        if (month_days > 0) {
            ck.near(got.total, total / static_cast<double>(sites) / static_cast<double>(years.size()), 1e-9,
                    tag + " monthly total");
            ck.near(got.wet_pct, 100.0 * static_cast<double>(wet_cells) / static_cast<double>(month_days * sites), 1e-9,
                    tag + " monthly wet percentage");
        }
    }
    const auto annual = metrics::annual_aggregates(obs, sims, 0.3);
    for (const auto& y : annual.years) {
        const auto [first, last] = cal.year_range(y.year);
        double total = 0.0;
        for (std::size_t t = first; t < last; ++t) {
            for (std::size_t s = 0; s < sites; ++s) {
                total += obs.values()(t, s);
            }
        }
        ck.near(y.observed.total, total / static_cast<double>(sites), 1e-9, tag + " annual total");
        std::vector<double> sim_totals;
        for (const auto& r : sims.realizations()) {
            double st = 0.0;
            for (std::size_t t = first; t < last; ++t) {
                for (std::size_t s = 0; s < sites; ++s) {
                    st += r.values(t, s);
                }
            }
            sim_totals.push_back(st / static_cast<double>(sites));
        }
        ck.near(y.sim_total.median, test::brute_quantile(sim_totals, 0.5), 1e-9, tag + " annual median");
        ck.near(y.sim_total.min, *std::min_element(sim_totals.begin(), sim_totals.end()), 1e-12, tag + " annual min");
        ck.near(y.sim_total.max, *std::max_element(sim_totals.begin(), sim_totals.end()), 1e-12, tag + " annual max");
    }

    // Identical inputs lie on the diagonal with zero-width envelopes.
    SimulationSet self(grid, cal, "self", 1);
    self.add(Realization{{1, 0, "self"}, obs.values()});
    for (const auto& p : metrics::pooled_qq(obs, self, levels)) {
        ck.expect(p.observed == p.simulated, tag + " self report QQ diagonal");
    }
    for (const auto& m : metrics::monthly_aggregates(obs, self, 0.3)) {
        if (m.observed.days > 0) {
            ck.near(m.sim_total.median, m.observed.total, 1e-12, tag + " self monthly median");
            ck.expect(m.sim_total.min == m.sim_total.max, tag + " self monthly envelope width");
        }
    }

    // Site reordering.
    std::vector<std::size_t> perm(sites);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto permute = [&](const PrecipMatrix& m) {
        PrecipMatrix out(days, sites);
        for (std::size_t t = 0; t < days; ++t) {
            for (std::size_t s = 0; s < sites; ++s) {
                out(t, s) = m(t, perm[s]);
            }
        }
        return out;
    };
    const ObservationSet pobs(grid, cal, permute(obs.values()));
    SimulationSet psims(grid, cal, "oracle", 1);
    for (const auto& r : sims.realizations()) {
        psims.add(Realization{r.info, permute(r.values)});
    }
    report::ReportConfig rc;
    rc.levels = levels;
    const auto a = report::to_json(report::build_report(obs, sims, rc, "a"));
    const auto b = report::to_json(report::build_report(pobs, psims, rc, "a"));
    std::function<bool(const nlohmann::json&, const nlohmann::json&)> same = [&](const nlohmann::json& x,
                                                                                 const nlohmann::json& y) {
        if (x.type() != y.type()) {
            return false;
        }
        auto close = [](double p, double q) { return std::abs(p - q) <= 1e-9 * std::max(1.0, std::abs(p)); };
        if (x.is_number_float()) {
            return close(x.get<double>(), y.get<double>());
        }
        if (x.is_string()) {
            // Summary rows hold formatted numbers.
            const auto& sx = x.get_ref<const std::string&>();
            const auto& sy = y.get_ref<const std::string&>();
            char* ex = nullptr;
            char* ey = nullptr;
            const double px = std::strtod(sx.c_str(), &ex);
            const double py = std::strtod(sy.c_str(), &ey);
            if (!sx.empty() && !sy.empty() && *ex == '\0' && *ey == '\0') {
                return close(px, py);
            }
            return sx == sy;
        }
        if (x.is_structured()) {
            if (x.size() != y.size()) {
                return false;
            }
            auto ix = x.begin();
            auto iy = y.begin();
            for (; ix != x.end(); ++ix, ++iy) {
                if ((x.is_object() && ix.key() != iy.key()) || !same(*ix, *iy)) {
                    return false;
                }
            }
            return true;
        }
        return x == y;
    };
    ck.expect(same(a, b), tag + " report invariant under site reordering");
}

Outcome check_p8() {
    Checker ck;
    Rng rng(8);
    for (int i = 0; i < 200; ++i) {
        check_sample(ck, rng, i);
    }
    Outcome o;
    o.pass = ck.failed == 0 && ck.checks > 0;
    o.detail = fmt("%zu/%zu oracle and invariant checks hold over 200 random samples", ck.checks - ck.failed, ck.checks);
    if (ck.failed > 0) {
        o.detail += "; first failure: " + ck.first;
    }
    return o;
}

// P9

int cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    args.insert(args.begin(), "precipgen");
    const int code = cli::run(args, out, err);
    if (code != 0) {
        std::fprintf(stderr, "precipgen %s failed (%d): %s\n", args.at(1).c_str(), code, err.str().c_str());
    }
    return code;
}

std::map<std::string, std::string> tree_hashes(const fs::path& root) {
    std::map<std::string, std::string> h;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) {
            h[fs::relative(e.path(), root).string()] = sha256_file(e.path());
        }
    }
    return h;
}

Outcome check_p9() {
    test::TempDir dir;
    const auto obs_csv = dir / "obs.csv";
    write_observations(
        synthesize_observations(monsoon_oracle_config(9), oracle_grid(2, 2), Calendar::years(1991, 2000)), obs_csv);
    auto write_seed = [&](const std::string& name, int seed) {
        test::write_text(dir / name, nlohmann::json{{"seed", seed}}.dump());
        return (dir / name).string();
    };
    const auto seed4 = write_seed("seed4.json", 4);
    const auto seed5 = write_seed("seed5.json", 5);
    const fs::path root = dir / "run";
    const std::vector<std::string> generators{"semiparametric", "wilks"};
    auto pipeline = [&](const std::string& cfg) {
        for (const auto& g : generators) {
            const auto base = root / g;
            if (cli({"fit", "--config", cfg, "--generator", g, "--obs", obs_csv.string(), "--out",
                     (base / "bundle").string()}) != 0 ||
                cli({"simulate", "--config", cfg, "--bundle", (base / "bundle").string(), "--generator", g,
                     "--n-sims", "3", "--out", (base / "sims").string()}) != 0 ||
                cli({"evaluate", "--config", cfg, "--obs", obs_csv.string(), "--sims",
                     (base / "sims" / "simulations.csv").string(), "--out", (base / "eval").string()}) != 0) {
                return false;
            }
        }
        return true;
    };
    Outcome o;
    if (!pipeline(seed4)) {
        o.detail = "pipeline failed";
        return o;
    }
    const auto first = tree_hashes(root);
    if (!pipeline(seed4)) {
        o.detail = "second pipeline run failed";
        return o;
    }
    const auto second = tree_hashes(root);
    const bool identical = first == second;

    if (!pipeline(seed5)) {
        o.detail = "pipeline with a different seed failed";
        return o;
    }
    const auto third = tree_hashes(root);
    bool sims_changed = true;
    bool bundles_same = true;
    std::size_t bundle_files = 0;
    for (const auto& g : generators) {
        sims_changed = sims_changed && first.at(g + "/sims/simulations.csv") != third.at(g + "/sims/simulations.csv");
        for (const auto& [rel, hash] : first) {
            if (rel.rfind(g + "/bundle/", 0) == 0 && rel != g + "/bundle/manifest.json") {
                ++bundle_files;
                bundles_same = bundles_same && third.count(rel) && third.at(rel) == hash;
            }
        }
    }
    o.pass = identical && sims_changed && bundles_same && first.size() > 30 && bundle_files > 0;
    o.detail = fmt("rerun with seed 4: %zu files %s; seed 5: simulations %s, %zu fitted bundle files %s; "
                   "fit, simulate, evaluate for semiparametric and wilks",
                   first.size(), identical ? "byte-identical" : "DIFFER", sims_changed ? "changed" : "UNCHANGED",
                   bundle_files, bundles_same ? "unchanged" : "CHANGED");
    o.info.push_back("bundle manifest.json records the run configuration, including the seed, and is excluded from the "
                     "bundle comparison");
    return o;
}

// P10

std::size_t count_fields(const std::string& line) {
    return static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
}

/// Rows excluding the header, or npos when a row's field count differs from the header's.
std::size_t csv_rows(const fs::path& path) {
    std::ifstream in(path);
    std::string line;
    if (!std::getline(in, line)) {
        return std::string::npos;
    }
    const std::size_t fields = count_fields(line);
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (count_fields(line) != fields) {
            return std::string::npos;
        }
        ++rows;
    }
    return rows;
}

Outcome check_p10() {
    constexpr std::size_t n_sims = 50;
    const auto cal = Calendar::years(1981, 2009);
    const auto obs = synthesize_observations(monsoon_oracle_config(10), oracle_grid(20, 20), cal);
    test::TempDir dir;
    const report::ReportConfig rc;
    const std::size_t levels = rc.levels.size();
    const std::map<std::string, std::size_t> expected{{"qq.csv", levels},
                                                      {"moments.csv", 2},
                                                      {"per_sim_moments.csv", n_sims},
                                                      {"spells.csv", 2 * levels},
                                                      {"per_day.csv", (1 + n_sims) * 366},
                                                      {"monthly.csv", 12},
                                                      {"annual.csv", 29 + 1}};
    Outcome o;
    bool shapes = true;
    std::vector<std::string> parts;
    auto evaluate = [&](const SimulationSet& sims, const std::string& name, double fit_s, double sim_s) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto rep = report::build_report(obs, sims, rc, name);
        report::write_report(rep, dir / name);
        const double eval_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::size_t present = 0;
        for (const auto* f : report::kReportFiles) {
            const auto it = expected.find(f);
            const bool ok = fs::exists(dir / name / f) && it != expected.end() && csv_rows(dir / name / f) == it->second;
            present += ok;
            shapes = shapes && ok;
        }
        shapes = shapes && fs::exists(dir / name / "report.json") && sims.size() == n_sims;
        parts.push_back(fmt("%s %zu/7 CSVs ok", name.c_str(), present));
        o.info.push_back(fmt("%s: fit %.1f s, simulate %zu x %zu days x %zu sites %.1f s, report %.1f s", name.c_str(),
                             fit_s, n_sims, cal.day_count(), obs.site_count(), sim_s, eval_s));
    };
    using clock = std::chrono::steady_clock;
    auto secs = [](clock::time_point a) { return std::chrono::duration<double>(clock::now() - a).count(); };
    {
        auto t = clock::now();
        const auto model = semiparametric::fit(obs, semiparametric::SemiParamConfig{});
        const double fit_s = secs(t);
        t = clock::now();
        const auto sims = semiparametric::simulate(model, cal, n_sims, 2024);
        evaluate(sims, "semiparametric", fit_s, secs(t));
    }
    {
        auto t = clock::now();
        const auto model = wilks::fit(obs, wilks::WilksConfig{});
        const double fit_s = secs(t);
        t = clock::now();
        const auto sims = wilks::simulate(model, cal, n_sims, 2024);
        evaluate(sims, "wilks", fit_s, secs(t));
    }
    std::vector<report::SummaryRow> rows{report::read_summary(dir / "semiparametric"),
                                         report::read_summary(dir / "wilks")};
    report::write_comparison(rows, dir / "comparison.csv");
    const bool comparison = csv_rows(dir / "comparison.csv") == 2;
    o.pass = shapes && comparison;
    o.detail = fmt("20x20 grid, %zu days, %zu realizations per generator: %s, %s; comparison.csv %s", cal.day_count(),
                   n_sims, parts.at(0).c_str(), parts.at(1).c_str(), comparison ? "ok" : "BAD");
    return o;
}

} // namespace

/// Optional arguments select criteria by id, e.g. `precipgen_acceptance P2 P8`.
int main(int argc, char** argv) {
    selected.insert(argv + 1, argv + argc);
    run("P1", 10, check_p1);
    run("P2", 120, check_p2);
    run("P3", 60, check_p3);
    run("P4", 180, check_p4);
    run("P5", 120, check_p5);
    run("P6", 5, check_p6);
    run("P7", 5, check_p7);
    run("P8", 30, check_p8);
    run("P9", 0, check_p9);
    run("P10", 900, check_p10);
    std::printf("%d of %d criteria failed\n", failures, executed);
    return failures == 0 && executed > 0 ? 0 : 1;
}
