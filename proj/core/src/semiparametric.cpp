#include "precipgen/semiparametric.hpp"

#include "precipgen/error.hpp"
#include "precipgen/parallel.hpp"
#include "precipgen/stats.hpp"

#include <algorithm>
#include <numeric>
#include <cmath>
#include <limits>

namespace precipgen::semiparametric {

namespace {

constexpr int kDoyCycle = 366;

std::size_t cell_index(int month, State s) { return static_cast<std::size_t>(month - 1) * 3 + markov::index(s); }
std::size_t pair_index(State prev, State cur) { return markov::index(prev) * 3 + markov::index(cur); }

} // namespace

double ResampleLibrary::bandwidth(std::size_t site, int month, State state) const {
    return bandwidth_.at(cell_index(month, state) * sites_ + site);
}

std::span<const double> ResampleLibrary::bandwidths(int month, State state) const {
    return std::span<const double>(bandwidth_).subspan(cell_index(month, state) * sites_, sites_);
}

std::size_t ResampleLibrary::cell_sample_size(std::size_t site, int month, State state) const {
    return cell_n_.at(cell_index(month, state) * sites_ + site);
}

double ResampleLibrary::source_annual_total(const LibraryEntry& e) const {
    return year_total_.at(static_cast<std::size_t>(e.source_year - first_year_));
}

std::span<const std::uint32_t> ResampleLibrary::pair_bucket(State prev, State cur, int day_of_year) const {
    return pair_buckets_.at(pair_index(prev, cur) * kDoyCycle + static_cast<std::size_t>(day_of_year - 1));
}

std::span<const std::uint32_t> ResampleLibrary::state_bucket(State cur, int day_of_year) const {
    return state_buckets_.at(markov::index(cur) * kDoyCycle + static_cast<std::size_t>(day_of_year - 1));
}

ResampleLibrary build_library(const ObservationSet& obs, const markov::OccurrenceThresholds& thr) {
    const auto& cal = obs.calendar();
    if (cal.day_count() < 2) {
        throw DataError("resampling library needs at least two observed days");
    }

    const auto means = regional_mean_series(obs.values());
    const auto states = markov::classify_days(means, cal, thr);

    ResampleLibrary lib;
    lib.sites_ = obs.site_count();
    lib.first_year_ = cal.first_year();
    lib.year_total_.assign(static_cast<std::size_t>(cal.year_count()), 0.0);
    for (int y = cal.first_year(); y <= cal.last_year(); ++y) {
        const auto [first, last] = cal.year_range(y);
        double sum = 0.0;
        for (std::size_t t = first; t < last; ++t) {
            sum += means[t];
        }
        const double n = static_cast<double>(last - first);
        lib.year_total_[static_cast<std::size_t>(y - lib.first_year_)] =
            n > 0 ? sum / n * static_cast<double>(days_in_year(y)) : 0.0;
    }

    lib.pair_buckets_.resize(9 * kDoyCycle);
    lib.state_buckets_.resize(3 * kDoyCycle);
    lib.entries_.reserve(obs.day_count() > 0 ? obs.day_count() - 1 : 0);
    for (std::size_t t = 1; t < obs.day_count(); ++t) {
        LibraryEntry e;
        e.prev_state = states[t - 1];
        e.state = states[t];
        e.day_of_year = cal.day_of_year(t);
        e.prev_regional_mean = means[t - 1];
        e.source_year = cal.year(t);
        e.source_day = static_cast<std::uint32_t>(t);
        const auto id = static_cast<std::uint32_t>(lib.entries_.size());
        lib.pair_buckets_[pair_index(e.prev_state, e.state) * kDoyCycle + static_cast<std::size_t>(e.day_of_year - 1)]
            .push_back(id);
        lib.state_buckets_[markov::index(e.state) * kDoyCycle + static_cast<std::size_t>(e.day_of_year - 1)]
            .push_back(id);
        lib.entries_.push_back(e);
    }

    // Bandwidths per (site, month, state) over positive amounts.
    const std::size_t n_cells = 12 * 3;
    lib.bandwidth_.assign(n_cells * lib.sites_, 0.0);
    lib.cell_n_.assign(n_cells * lib.sites_, 0);
    std::vector<std::vector<std::size_t>> days_in_cell(n_cells);
    for (std::size_t t = 0; t < obs.day_count(); ++t) {
        days_in_cell[cell_index(cal.month(t), states[t])].push_back(t);
    }
    std::vector<double> sample;
    for (std::size_t c = 0; c < n_cells; ++c) {
        for (std::size_t s = 0; s < lib.sites_; ++s) {
            sample.clear();
            for (std::size_t t : days_in_cell[c]) {
                const float v = obs.values()(t, s);
                if (v > 0.0f) {
                    sample.push_back(v);
                }
            }
            lib.cell_n_[c * lib.sites_ + s] = static_cast<std::uint32_t>(sample.size());
            lib.bandwidth_[c * lib.sites_ + s] = stats::silverman_bandwidth(sample);
        }
    }
    return lib;
}

int circular_day_distance(int a, int b) noexcept {
    const int d = std::abs(a - b) % kDoyCycle;
    return std::min(d, kDoyCycle - d);
}

namespace {

template <typename BucketFn>
void gather_window(std::vector<std::uint32_t>& out, int day_of_year, int window, BucketFn&& bucket) {
    if (2 * window + 1 >= kDoyCycle) {
        for (int doy = 1; doy <= kDoyCycle; ++doy) {
            const auto b = bucket(doy);
            out.insert(out.end(), b.begin(), b.end());
        }
        return;
    }
    for (int off = -window; off <= window; ++off) {
        const int doy = ((day_of_year - 1 + off) % kDoyCycle + kDoyCycle) % kDoyCycle + 1;
        const auto b = bucket(doy);
        out.insert(out.end(), b.begin(), b.end());
    }
}

} // namespace

CandidateSet knn_candidates(const ResampleLibrary& library, State prev, State cur, int day_of_year, int window) {
    if (library.empty()) {
        throw DataError("resampling library is empty");
    }
    if (day_of_year < 1 || day_of_year > kDoyCycle || window < 0) {
        throw ConfigError("knn_candidates: day of year must be 1..366 and window >= 0");
    }
    CandidateSet out;
    gather_window(out.entries, day_of_year, window, [&](int d) { return library.pair_bucket(prev, cur, d); });
    if (!out.entries.empty()) {
        return out;
    }
    out.fallback_level = 1;
    gather_window(out.entries, day_of_year, window, [&](int d) { return library.state_bucket(cur, d); });
    if (!out.entries.empty()) {
        return out;
    }
    out.fallback_level = 2;
    gather_window(out.entries, day_of_year, kDoyCycle, [&](int d) { return library.state_bucket(cur, d); });
    if (out.entries.empty()) {
        throw DataError("no historical day in state '" + std::string(markov::name(cur)) +
                        "'; training data cannot support this state");
    }
    return out;
}

std::size_t effective_k(std::size_t requested, std::size_t n_candidates) noexcept {
    if (n_candidates == 0) {
        return 0;
    }
    std::size_t k = requested;
    if (k == 0) {
        k = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n_candidates))));
    }
    return std::clamp<std::size_t>(k, 1, n_candidates);
}

std::vector<double> harmonic_weights(std::size_t k) {
    std::vector<double> w(k);
    double total = 0.0;
    for (std::size_t j = 1; j <= k; ++j) {
        total += 1.0 / static_cast<double>(j);
    }
    for (std::size_t j = 1; j <= k; ++j) {
        w[j - 1] = (1.0 / static_cast<double>(j)) / total;
    }
    return w;
}

namespace {

std::vector<RankedCandidate> distances(const ResampleLibrary& library, std::span<const std::uint32_t> candidates,
                                       const SelectionQuery& query) {
    std::vector<RankedCandidate> ranked;
    ranked.reserve(candidates.size());
    const bool annual = query.target_annual.has_value() && query.annual_weight > 0.0;
    for (std::uint32_t id : candidates) {
        const auto& e = library.entries()[id];
        double d = std::abs(e.prev_regional_mean - query.prev_sim_regional_mean);
        if (annual) {
            d += query.annual_weight * std::abs(library.source_annual_total(e) - *query.target_annual) /
                 static_cast<double>(query.days_in_year);
        }
        ranked.push_back({id, d});
    }
    return ranked;
}

auto rank_order(const ResampleLibrary& library) {
    return [&library](const RankedCandidate& a, const RankedCandidate& b) {
        if (a.distance != b.distance) {
            return a.distance < b.distance;
        }
        return library.entries()[a.entry].source_day < library.entries()[b.entry].source_day;
    };
}

} // namespace

std::vector<RankedCandidate> rank_candidates(const ResampleLibrary& library, std::span<const std::uint32_t> candidates,
                                             const SelectionQuery& query) {
    auto ranked = distances(library, candidates, query);
    std::sort(ranked.begin(), ranked.end(), rank_order(library));
    return ranked;
}

std::uint32_t knn_select(const ResampleLibrary& library, std::span<const std::uint32_t> candidates,
                         const SelectionQuery& query, Rng& rng) {
    if (candidates.empty()) {
        throw DataError("knn_select: no candidates");
    }
    struct Keyed {
        double distance;
        std::uint32_t tie;
        std::uint32_t entry;
        bool operator<(const Keyed& o) const { return distance != o.distance ? distance < o.distance : tie < o.tie; }
    };
    const std::size_t n = candidates.size();
    const std::size_t k = effective_k(query.k, n);
    // Equal distances are ordered by a random rotation of the candidate list.
    std::uniform_int_distribution<std::size_t> rotation(0, n - 1);
    const std::size_t offset = rotation(rng);
    const bool annual = query.target_annual.has_value() && query.annual_weight > 0.0;
    const double annual_scale = query.annual_weight / static_cast<double>(query.days_in_year);
    thread_local std::vector<Keyed> keyed;
    keyed.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& e = library.entries()[candidates[i]];
        double d = std::abs(e.prev_regional_mean - query.prev_sim_regional_mean);
        if (annual) {
            d += annual_scale * std::abs(library.source_annual_total(e) - *query.target_annual);
        }
        keyed[i] = {d, static_cast<std::uint32_t>((i + n - offset) % n), candidates[i]};
    }
    const auto kth = keyed.begin() + static_cast<std::ptrdiff_t>(k);
    if (k < n) {
        std::nth_element(keyed.begin(), kth - 1, keyed.end());
    }
    std::sort(keyed.begin(), kth);
    const auto weights = harmonic_weights(k);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double u = unif(rng);
    double acc = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        acc += weights[j];
        if (u < acc) {
            return keyed[j].entry;
        }
    }
    return keyed[k - 1].entry;
}

std::vector<float> kde_perturb(std::span<const float> field, std::span<const double> bandwidths, double eps) {
    if (field.size() != bandwidths.size()) {
        throw ConfigError("kde_perturb: field and bandwidths differ in length");
    }
    std::vector<float> out(field.begin(), field.end());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out[i] > 0.0f) {
            out[i] = static_cast<float>(std::abs(static_cast<double>(field[i]) + bandwidths[i] * eps));
        }
    }
    return out;
}

std::vector<float> kde_perturb(std::span<const float> field, int month, State state, const ResampleLibrary& library,
                               Rng& rng) {
    if (state == State::Dry) {
        return {field.begin(), field.end()};
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    return kde_perturb(field, library.bandwidths(month, state), normal(rng));
}

void SemiParamConfig::validate() const {
    if (window < 0) {
        throw ConfigError("window half-width must be >= 0");
    }
    if (!(annual_weight >= 0.0) || !std::isfinite(annual_weight)) {
        throw ConfigError("annual weight lambda must be >= 0");
    }
    if (!(wet_threshold > 0.0)) {
        throw ConfigError("wet_threshold must be positive");
    }
    if (!(extreme_quantile > 0.0 && extreme_quantile < 1.0)) {
        throw ConfigError("extreme_quantile must lie in (0, 1)");
    }
    if (!(pseudo >= 0.0)) {
        throw ConfigError("pseudo-count must be >= 0");
    }
    if (arima_order.p < 0 || arima_order.d < 0 || arima_order.q < 0) {
        throw ConfigError("ARIMA order entries must be >= 0");
    }
}

SemiParamModel fit(const ObservationSet& obs, const SemiParamConfig& config) {
    config.validate();
    SemiParamModel model;
    model.config = config;
    model.observations = obs;
    model.thresholds = markov::fit_thresholds(obs, config.wet_threshold, config.extreme_quantile);
    model.observed_states = markov::classify_days(obs, model.thresholds);
    model.transitions = markov::fit_transitions(model.observed_states, obs.calendar(), config.pseudo);
    model.observed_annual = arima::annual_totals(obs);
    if (config.annual_weight > 0.0 ||
        model.observed_annual.totals.size() >= arima::minimum_length(config.arima_order)) {
        model.arima = arima::fit(model.observed_annual.totals, config.arima_order);
    }
    model.library = build_library(obs, model.thresholds);
    return model;
}

namespace {

/// Annual history visible when simulating `year`: observed totals of earlier
/// observed years, then simulated totals of earlier years past the record.
std::vector<double> history_for(const SemiParamModel& model, int year, const std::vector<std::pair<int, double>>& sim) {
    std::vector<double> h;
    const auto& obs = model.observed_annual;
    for (std::size_t i = 0; i < obs.years.size(); ++i) {
        if (obs.years[i] < year) {
            h.push_back(obs.totals[i]);
        }
    }
    const int last_obs = obs.years.empty() ? std::numeric_limits<int>::min() : obs.years.back();
    for (const auto& [y, total] : sim) {
        if (y > last_obs && y < year) {
            h.push_back(total);
        }
    }
    return h;
}

std::optional<double> observed_total(const SemiParamModel& model, int year) {
    const auto& obs = model.observed_annual;
    const auto it = std::find(obs.years.begin(), obs.years.end(), year);
    if (it == obs.years.end()) {
        return std::nullopt;
    }
    return obs.totals[static_cast<std::size_t>(it - obs.years.begin())];
}

double annual_target(const SemiParamModel& model, const std::vector<double>& history) {
    const auto& m = *model.arima;
    const auto need = static_cast<std::size_t>(m.order.p + m.order.d);
    if (history.size() >= need && !(m.order.d > 0 && history.empty())) {
        return arima::project_annual_total(m, history);
    }
    // Before enough history exists the unconditional level is the best guess.
    if (m.order.d == 0) {
        return m.mean;
    }
    const auto& totals = model.observed_annual.totals;
    return stats::mean(totals);
}

} // namespace

Realization simulate_realization(const SemiParamModel& model, const Calendar& calendar, int sim_id,
                                 std::uint64_t seed, RealizationTrace* trace) {
    const auto& obs = model.observations;
    const auto& lib = model.library;
    const auto& cfg = model.config;
    const std::size_t sites = obs.site_count();

    const State initial = model.observed_states.front();
    const auto states = markov::simulate_states(model.transitions, calendar, initial, derive_seed(seed, 0));
    Rng select_rng(derive_seed(seed, 1));
    Rng kde_rng(derive_seed(seed, 2));
    Rng annual_rng(derive_seed(seed, 3));
    std::normal_distribution<double> innovation(0.0, 1.0);

    Realization out;
    out.info = {sim_id, seed, kGeneratorName};
    out.values = PrecipMatrix(calendar.day_count(), sites);

    SimulationDiagnostics diag;
    if (trace) {
        trace->source_day.assign(calendar.day_count(), 0);
        trace->target_annual.clear();
    }

    const bool use_annual = cfg.annual_weight > 0.0 && model.arima.has_value();
    std::vector<std::pair<int, double>> sim_totals;
    State prev_state = initial;
    double prev_mean = regional_mean(obs.values().day(0));
    std::optional<double> target;
    int current_year = std::numeric_limits<int>::min();
    double year_sum = 0.0;
    std::size_t year_days = 0;

    auto close_year = [&]() {
        if (year_days > 0) {
            sim_totals.emplace_back(current_year, year_sum / static_cast<double>(year_days) *
                                                      static_cast<double>(days_in_year(current_year)));
        }
    };

    for (std::size_t t = 0; t < calendar.day_count(); ++t) {
        const int year = calendar.year(t);
        if (year != current_year) {
            close_year();
            current_year = year;
            year_sum = 0.0;
            year_days = 0;
            target.reset();
            if (use_annual) {
                const auto observed = observed_total(model, year);
                if (observed && cfg.annual_target == AnnualTarget::Reconstruct) {
                    target = *observed;
                } else {
                    target = annual_target(model, history_for(model, year, sim_totals));
                }
                if (cfg.annual_innovations && !(observed && cfg.annual_target == AnnualTarget::Reconstruct)) {
                    *target = std::max(0.0, *target + std::sqrt(model.arima->innovation_variance) *
                                                          innovation(annual_rng));
                }
            }
            if (trace) {
                trace->target_annual.push_back(target.value_or(std::numeric_limits<double>::quiet_NaN()));
            }
        }
        const State cur = states[t];
        const int doy = calendar.day_of_year(t);
        const auto candidates = knn_candidates(lib, prev_state, cur, doy, cfg.window);
        ++diag.fallback_counts[static_cast<std::size_t>(candidates.fallback_level)];

        SelectionQuery query;
        query.prev_sim_regional_mean = prev_mean;
        query.k = cfg.k;
        query.annual_weight = cfg.annual_weight;
        query.target_annual = target;
        query.days_in_year = days_in_year(year);
        const std::uint32_t chosen = knn_select(lib, candidates.entries, query, select_rng);
        const auto& entry = lib.entries()[chosen];
        if (entry.state != cur) {
            ++diag.state_mismatches;
        }

        auto dest = out.values.day(t);
        const auto src = obs.values().day(entry.source_day);
        if (cfg.kde && cur != State::Dry) {
            const auto perturbed = kde_perturb(src, calendar.month(t), cur, lib, kde_rng);
            std::copy(perturbed.begin(), perturbed.end(), dest.begin());
        } else {
            std::copy(src.begin(), src.end(), dest.begin());
        }
        if (trace) {
            trace->source_day[t] = entry.source_day;
        }

        prev_mean = regional_mean(std::span<const float>(dest));
        prev_state = cur;
        year_sum += prev_mean;
        ++year_days;
        ++diag.days;
    }
    if (trace) {
        trace->diagnostics = diag;
    }
    return out;
}

SimulationSet simulate(const SemiParamModel& model, const Calendar& calendar, std::size_t n_sims,
                       std::uint64_t master_seed, unsigned jobs, SimulationDiagnostics* totals) {
    if (n_sims == 0) {
        throw ConfigError("number of simulations must be >= 1");
    }
    std::vector<Realization> reals(n_sims);
    std::vector<SimulationDiagnostics> diags(n_sims);
    parallel_for(n_sims, jobs, [&](std::size_t r) {
        RealizationTrace trace;
        reals[r] = simulate_realization(model, calendar, static_cast<int>(r + 1), derive_seed(master_seed, r), &trace);
        diags[r] = trace.diagnostics;
    });
    SimulationSet set(model.observations.grid(), calendar, kGeneratorName, master_seed, true);
    for (auto& r : reals) {
        set.add(std::move(r));
    }
    if (totals) {
        *totals = {};
        for (const auto& d : diags) {
            totals->days += d.days;
            totals->state_mismatches += d.state_mismatches;
            for (std::size_t i = 0; i < 3; ++i) {
                totals->fallback_counts[i] += d.fallback_counts[i];
            }
        }
    }
    return set;
}

SimulationSet simulate(const ObservationSet& obs, const SemiParamConfig& config, std::size_t n_sims,
                       std::uint64_t master_seed, unsigned jobs) {
    const auto model = fit(obs, config);
    return simulate(model, obs.calendar(), n_sims, master_seed, jobs);
}

nlohmann::json to_json(const SemiParamConfig& c) {
    return {{"k", c.k},
            {"window", c.window},
            {"lambda", c.annual_weight},
            {"annual_target", c.annual_target == AnnualTarget::Reconstruct ? "reconstruct" : "forecast"},
            {"annual_innovations", c.annual_innovations},
            {"kde", c.kde},
            {"wet_threshold", c.wet_threshold},
            {"extreme_quantile", c.extreme_quantile},
            {"pseudo", c.pseudo},
            {"arima_order", {c.arima_order.p, c.arima_order.d, c.arima_order.q}}};
}

SemiParamConfig config_from_json(const nlohmann::json& j) {
    SemiParamConfig c;
    try {
        c.k = j.value("k", c.k);
        c.window = j.value("window", c.window);
        c.annual_weight = j.value("lambda", c.annual_weight);
        c.annual_innovations = j.value("annual_innovations", c.annual_innovations);
        if (j.contains("annual_target")) {
            const auto mode = j.at("annual_target").get<std::string>();
            if (mode == "reconstruct") {
                c.annual_target = AnnualTarget::Reconstruct;
            } else if (mode == "forecast") {
                c.annual_target = AnnualTarget::Forecast;
            } else {
                throw ConfigError("annual_target must be 'reconstruct' or 'forecast', got '" + mode + "'");
            }
        }
        c.kde = j.value("kde", c.kde);
        c.wet_threshold = j.value("wet_threshold", c.wet_threshold);
        c.extreme_quantile = j.value("extreme_quantile", c.extreme_quantile);
        c.pseudo = j.value("pseudo", c.pseudo);
        if (j.contains("arima_order")) {
            const auto& o = j.at("arima_order");
            c.arima_order = {o.at(0).get<int>(), o.at(1).get<int>(), o.at(2).get<int>()};
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid semiparametric configuration: ") + e.what());
    }
    c.validate();
    return c;
}

nlohmann::json library_summary(const ResampleLibrary& library) {
    nlohmann::json pairs = nlohmann::json::object();
    std::array<std::size_t, 9> counts{};
    for (const auto& e : library.entries()) {
        ++counts[pair_index(e.prev_state, e.state)];
    }
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            pairs[std::string(markov::name(markov::state_from_index(i))) + "->" +
                  std::string(markov::name(markov::state_from_index(j)))] = counts[i * 3 + j];
        }
    }
    auto bw = nlohmann::json::array();
    for (int m = 1; m <= 12; ++m) {
        for (std::size_t s = 0; s < 3; ++s) {
            const auto state = markov::state_from_index(s);
            const auto b = library.bandwidths(m, state);
            bw.push_back({{"month", m},
                          {"state", markov::name(state)},
                          {"bandwidth", std::vector<double>(b.begin(), b.end())}});
        }
    }
    return {{"entries", library.size()}, {"sites", library.site_count()}, {"pairs", pairs}, {"bandwidths", bw}};
}

} // namespace precipgen::semiparametric
