#include "precipgen/cli/run_config.hpp"

#include "precipgen/error.hpp"
#include "precipgen/io.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <limits>

namespace precipgen::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) {
        throw ConfigError(where + ": expected a JSON object");
    }
    for (const auto& [key, value] : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
            throw ConfigError(where + ": unknown key '" + key + "'");
        }
    }
}

template <typename T>
T get(const json& j, const char* key, const std::string& where) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + ": invalid value " + j.at(key).dump());
    }
}

std::uint64_t get_unsigned(const json& j, const char* key, const std::string& where) {
    const auto& v = j.at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
        throw ConfigError(where + "." + key + ": expected a nonnegative integer, got " + v.dump());
    }
    return v.get<std::uint64_t>();
}

double get_number(const json& j, const char* key, const std::string& where) {
    const auto& v = j.at(key);
    if (!v.is_number()) {
        throw ConfigError(where + "." + key + ": expected a number, got " + v.dump());
    }
    return v.get<double>();
}

bool get_bool(const json& j, const char* key, const std::string& where) {
    const auto& v = j.at(key);
    if (!v.is_boolean()) {
        throw ConfigError(where + "." + key + ": expected true or false, got " + v.dump());
    }
    return v.get<bool>();
}

GridSpec parse_grid(const json& j) {
    reject_unknown(j, "grid", {"lat_min", "lat_max", "lon_min", "lon_max", "resolution", "site_count"});
    for (const char* k : {"lat_min", "lat_max", "lon_min", "lon_max", "resolution"}) {
        if (!j.contains(k)) {
            throw ConfigError(std::string("grid.") + k + ": missing");
        }
    }
    try {
        return GridSpec(get_number(j, "lat_min", "grid"), get_number(j, "lat_max", "grid"),
                        get_number(j, "lon_min", "grid"), get_number(j, "lon_max", "grid"),
                        get_number(j, "resolution", "grid"));
    } catch (const DataError& e) {
        throw ConfigError(std::string("grid: ") + e.what());
    }
}

Calendar parse_calendar(const json& j) {
    reject_unknown(j, "calendar", {"start", "end", "day_count"});
    if (!j.contains("start") || !j.contains("end")) {
        throw ConfigError("calendar: both start and end are required");
    }
    try {
        return Calendar(parse_date(get<std::string>(j, "start", "calendar")),
                        parse_date(get<std::string>(j, "end", "calendar")));
    } catch (const DataError& e) {
        throw ConfigError(std::string("calendar: ") + e.what());
    }
}

void parse_semiparametric(const json& j, semiparametric::SemiParamConfig& c) {
    const std::string w = "semiparametric";
    reject_unknown(j, w,
                   {"k", "window", "lambda", "kde", "pseudo", "arima_order", "annual_target", "annual_innovations"});
    if (j.contains("k")) {
        c.k = static_cast<std::size_t>(get_unsigned(j, "k", w));
    }
    if (j.contains("window")) {
        c.window = static_cast<int>(get_unsigned(j, "window", w));
    }
    if (j.contains("lambda")) {
        c.annual_weight = get_number(j, "lambda", w);
    }
    if (j.contains("kde")) {
        c.kde = get_bool(j, "kde", w);
    }
    if (j.contains("pseudo")) {
        c.pseudo = get_number(j, "pseudo", w);
    }
    if (j.contains("arima_order")) {
        const auto& o = j.at("arima_order");
        if (!o.is_array() || o.size() != 3 || !std::all_of(o.begin(), o.end(), [](const json& x) {
                return x.is_number_integer();
            })) {
            throw ConfigError("semiparametric.arima_order: expected [p, d, q], got " + o.dump());
        }
        c.arima_order = {o[0].get<int>(), o[1].get<int>(), o[2].get<int>()};
    }
    if (j.contains("annual_target")) {
        const auto mode = get<std::string>(j, "annual_target", w);
        if (mode == "reconstruct") {
            c.annual_target = semiparametric::AnnualTarget::Reconstruct;
        } else if (mode == "forecast") {
            c.annual_target = semiparametric::AnnualTarget::Forecast;
        } else {
            throw ConfigError("semiparametric.annual_target: expected 'reconstruct' or 'forecast', got '" + mode +
                              "'");
        }
    }
    if (j.contains("annual_innovations")) {
        c.annual_innovations = get_bool(j, "annual_innovations", w);
    }
}

void parse_wilks(const json& j, wilks::WilksConfig& c) {
    const std::string w = "wilks";
    reject_unknown(j, w, {"pseudo", "calibration_tolerance", "max_iterations"});
    if (j.contains("pseudo")) {
        c.pseudo = get_number(j, "pseudo", w);
    }
    if (j.contains("calibration_tolerance")) {
        c.calibration_tolerance = get_number(j, "calibration_tolerance", w);
    }
    if (j.contains("max_iterations")) {
        const auto n = get_unsigned(j, "max_iterations", w);
        if (n > static_cast<std::uint64_t>(std::numeric_limits<int>::max())) {
            throw ConfigError("wilks.max_iterations: too large");
        }
        c.max_iterations = static_cast<int>(n);
    }
}

void parse_evaluation(const json& j, report::ReportConfig& c) {
    const std::string w = "evaluation";
    reject_unknown(j, w, {"levels", "spell_mode"});
    if (j.contains("levels")) {
        const auto& l = j.at("levels");
        if (!l.is_array() || !std::all_of(l.begin(), l.end(), [](const json& x) { return x.is_number(); })) {
            throw ConfigError("evaluation.levels: expected an array of numbers, got " + l.dump());
        }
        c.levels = l.get<std::vector<double>>();
    }
    if (j.contains("spell_mode")) {
        const auto mode = get<std::string>(j, "spell_mode", w);
        if (mode == "regional") {
            c.spell_mode = metrics::SpellMode::Regional;
        } else if (mode == "per_site") {
            c.spell_mode = metrics::SpellMode::PerSite;
        } else {
            throw ConfigError("evaluation.spell_mode: expected 'regional' or 'per_site', got '" + mode + "'");
        }
    }
}

std::vector<fs::path> parse_paths(const json& j, const char* key) {
    const auto& v = j.at(key);
    if (!v.is_array() || !std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_string(); })) {
        throw ConfigError(std::string(key) + ": expected an array of strings");
    }
    std::vector<fs::path> out;
    for (const auto& x : v) {
        out.emplace_back(x.get<std::string>());
    }
    return out;
}

template <typename Fn>
void rethrow_as_config(const std::string& where, Fn&& fn) {
    try {
        fn();
    } catch (const ConfigError& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

} // namespace

void RunConfig::apply_thresholds() {
    semiparametric.wet_threshold = wet_threshold;
    semiparametric.extreme_quantile = extreme_quantile;
    wilks.wet_threshold = wet_threshold;
    evaluation.wet_threshold = wet_threshold;
}

void RunConfig::validate() const {
    if (generator && *generator != semiparametric::kGeneratorName && *generator != wilks::kGeneratorName) {
        throw ConfigError("generator: expected 'semiparametric' or 'wilks', got '" + *generator + "'");
    }
    if (n_sims == 0) {
        throw ConfigError("n_sims: must be >= 1");
    }
    if (jobs == 0) {
        throw ConfigError("jobs: must be >= 1");
    }
    if (!labels.empty() && labels.size() != simulations.size()) {
        throw ConfigError("labels: need one label per simulations entry");
    }
    rethrow_as_config("semiparametric", [&] { semiparametric.validate(); });
    rethrow_as_config("wilks", [&] { wilks.validate(); });
    rethrow_as_config("evaluation", [&] { evaluation.validate(); });
}

RunConfig parse_run_config(const json& j) {
    reject_unknown(j, "config",
                   {"generator", "observations", "grid", "calendar", "thresholds", "semiparametric", "wilks",
                    "evaluation", "n_sims", "seed", "jobs", "bundle", "simulations", "labels", "out"});
    RunConfig c;
    const std::string w = "config";
    if (j.contains("generator")) {
        c.generator = get<std::string>(j, "generator", w);
    }
    if (j.contains("observations")) {
        c.observations = get<std::string>(j, "observations", w);
    }
    if (j.contains("grid")) {
        c.grid = parse_grid(j.at("grid"));
    }
    if (j.contains("calendar")) {
        c.calendar = parse_calendar(j.at("calendar"));
    }
    if (j.contains("thresholds")) {
        const auto& t = j.at("thresholds");
        reject_unknown(t, "thresholds", {"wet_mm", "extreme_quantile"});
        if (t.contains("wet_mm")) {
            c.wet_threshold = get_number(t, "wet_mm", "thresholds");
        }
        if (t.contains("extreme_quantile")) {
            c.extreme_quantile = get_number(t, "extreme_quantile", "thresholds");
        }
    }
    if (j.contains("semiparametric")) {
        parse_semiparametric(j.at("semiparametric"), c.semiparametric);
    }
    if (j.contains("wilks")) {
        parse_wilks(j.at("wilks"), c.wilks);
    }
    if (j.contains("evaluation")) {
        parse_evaluation(j.at("evaluation"), c.evaluation);
    }
    if (j.contains("n_sims")) {
        c.n_sims = static_cast<std::size_t>(get_unsigned(j, "n_sims", w));
    }
    if (j.contains("seed")) {
        c.seed = get_unsigned(j, "seed", w);
    }
    if (j.contains("jobs")) {
        const auto n = get_unsigned(j, "jobs", w);
        if (n > 4096) {
            throw ConfigError("jobs: at most 4096");
        }
        c.jobs = static_cast<unsigned>(n);
    }
    if (j.contains("bundle")) {
        c.bundle = get<std::string>(j, "bundle", w);
    }
    if (j.contains("simulations")) {
        c.simulations = parse_paths(j, "simulations");
    }
    if (j.contains("labels")) {
        const auto& l = j.at("labels");
        if (!l.is_array() || !std::all_of(l.begin(), l.end(), [](const json& x) { return x.is_string(); })) {
            throw ConfigError("labels: expected an array of strings");
        }
        c.labels = l.get<std::vector<std::string>>();
    }
    if (j.contains("out")) {
        c.out = get<std::string>(j, "out", w);
    }
    c.apply_thresholds();
    c.validate();
    return c;
}

RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path.string());
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return parse_run_config(j);
}

json to_json(const RunConfig& c) {
    json j;
    if (c.generator) {
        j["generator"] = *c.generator;
    }
    if (c.observations) {
        j["observations"] = c.observations->string();
    }
    if (c.grid) {
        auto g = precipgen::to_json(*c.grid);
        g.erase("site_count");
        j["grid"] = g;
    }
    if (c.calendar) {
        auto cal = precipgen::to_json(*c.calendar);
        cal.erase("day_count");
        j["calendar"] = cal;
    }
    j["thresholds"] = {{"wet_mm", c.wet_threshold}, {"extreme_quantile", c.extreme_quantile}};
    const auto& s = c.semiparametric;
    j["semiparametric"] = {
        {"k", s.k},
        {"window", s.window},
        {"lambda", s.annual_weight},
        {"kde", s.kde},
        {"pseudo", s.pseudo},
        {"arima_order", {s.arima_order.p, s.arima_order.d, s.arima_order.q}},
        {"annual_target", s.annual_target == semiparametric::AnnualTarget::Reconstruct ? "reconstruct" : "forecast"},
        {"annual_innovations", s.annual_innovations}};
    j["wilks"] = {{"pseudo", c.wilks.pseudo},
                  {"calibration_tolerance", c.wilks.calibration_tolerance},
                  {"max_iterations", c.wilks.max_iterations}};
    j["evaluation"] = {{"levels", c.evaluation.levels},
                       {"spell_mode", c.evaluation.spell_mode == metrics::SpellMode::Regional ? "regional" : "per_site"}};
    j["n_sims"] = c.n_sims;
    j["seed"] = c.seed;
    j["jobs"] = c.jobs;
    if (c.bundle) {
        j["bundle"] = c.bundle->string();
    }
    if (!c.simulations.empty()) {
        auto a = json::array();
        for (const auto& p : c.simulations) {
            a.push_back(p.string());
        }
        j["simulations"] = a;
    }
    if (!c.labels.empty()) {
        j["labels"] = c.labels;
    }
    if (c.out) {
        j["out"] = c.out->string();
    }
    return j;
}

} // namespace precipgen::cli
