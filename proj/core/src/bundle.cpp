#include "precipgen/bundle.hpp"

#include "precipgen/error.hpp"
#include "precipgen/hash.hpp"
#include "precipgen/io.hpp"

namespace precipgen::bundle {

namespace fs = std::filesystem;

namespace {

constexpr const char* kFormat = "precipgen-bundle";
constexpr int kVersion = 1;

nlohmann::json read_required(const fs::path& path) {
    if (!fs::exists(path)) {
        throw DataError("bundle file missing: " + path.string());
    }
    return read_json_file(path);
}

nlohmann::json read_header(const fs::path& dir, const std::string& expected_generator) {
    const auto j = read_required(dir / "bundle.json");
    try {
        if (j.at("format").get<std::string>() != kFormat) {
            throw DataError(dir.string() + ": not a precipgen bundle");
        }
        if (j.at("version").get<int>() != kVersion) {
            throw DataError(dir.string() + ": unsupported bundle version");
        }
        const auto gen = j.at("generator").get<std::string>();
        if (!expected_generator.empty() && gen != expected_generator) {
            throw DataError(dir.string() + ": bundle holds a '" + gen + "' model, expected '" + expected_generator +
                            "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError((dir / "bundle.json").string() + ": " + e.what());
    }
    return j;
}

nlohmann::json header(const std::string& generator, const GridSpec& grid, const Calendar& calendar) {
    return {{"format", kFormat},
            {"version", kVersion},
            {"generator", generator},
            {"grid", to_json(grid)},
            {"calendar", to_json(calendar)}};
}

} // namespace

void save(const semiparametric::SemiParamModel& model, const fs::path& dir, const fs::path& observations_path) {
    fs::create_directories(dir);
    auto h = header(semiparametric::kGeneratorName, model.observations.grid(), model.observations.calendar());
    h["config"] = semiparametric::to_json(model.config);
    h["observations"] = {{"path", fs::absolute(observations_path).lexically_normal().string()},
                         {"sha256", sha256_file(observations_path)}};
    write_json_file(h, dir / "bundle.json");
    write_json_file(markov::to_json(model.thresholds), dir / "thresholds.json");
    write_json_file(markov::to_json(model.transitions), dir / "transitions.json");
    write_json_file(model.arima ? arima::to_json(*model.arima) : nlohmann::json(nullptr), dir / "arima.json");
    write_json_file(semiparametric::library_summary(model.library), dir / "library.json");
}

semiparametric::SemiParamModel load_semiparametric(const fs::path& dir) {
    const auto h = read_header(dir, semiparametric::kGeneratorName);
    semiparametric::SemiParamModel model;
    fs::path obs_path;
    std::string sha;
    GridSpec grid;
    Calendar calendar;
    try {
        model.config = semiparametric::config_from_json(h.at("config"));
        obs_path = h.at("observations").at("path").get<std::string>();
        sha = h.at("observations").at("sha256").get<std::string>();
        grid = grid_from_json(h.at("grid"));
        calendar = calendar_from_json(h.at("calendar"));
    } catch (const nlohmann::json::exception& e) {
        throw DataError((dir / "bundle.json").string() + ": " + e.what());
    }
    if (!fs::exists(obs_path)) {
        throw DataError("bundle observations not found: " + obs_path.string());
    }
    if (sha256_file(obs_path) != sha) {
        throw DataError("bundle observations changed since fitting: " + obs_path.string());
    }
    model.observations = load_observations(obs_path, grid, calendar);
    model.thresholds = markov::thresholds_from_json(read_required(dir / "thresholds.json"));
    model.transitions = markov::transitions_from_json(read_required(dir / "transitions.json"));
    const auto a = read_required(dir / "arima.json");
    if (!a.is_null()) {
        model.arima = arima::model_from_json(a);
    }
    if (model.config.annual_weight > 0.0 && !model.arima) {
        throw DataError(dir.string() + ": annual conditioning requires an ARIMA model");
    }
    model.observed_states = markov::classify_days(model.observations, model.thresholds);
    model.observed_annual = arima::annual_totals(model.observations);
    model.library = semiparametric::build_library(model.observations, model.thresholds);
    return model;
}

void save(const wilks::WilksModel& model, const fs::path& dir) {
    fs::create_directories(dir);
    auto h = header(wilks::kGeneratorName, model.grid, model.calendar);
    h["config"] = wilks::to_json(model.config);
    h["initial_wet"] = model.initial_wet;
    const auto& oc = model.occurrence_correlation;
    h["occurrence_calibration"] = {{"repair", wilks::to_json(oc.repair)},
                                   {"max_abs_residual", oc.max_abs_residual},
                                   {"clamped_pairs", oc.clamped_pairs},
                                   {"degenerate_pairs", oc.degenerate_pairs}};
    h["amount_correlation"] = {{"repair", wilks::to_json(model.amounts.repair)}};
    write_json_file(h, dir / "bundle.json");
    write_json_file(glm::to_json(model.occurrence), dir / "glm.json");
    write_json_file({{"observed", wilks::matrix_to_json(oc.observed)},
                     {"raw", wilks::matrix_to_json(oc.raw)},
                     {"omega", wilks::matrix_to_json(oc.omega)}},
                    dir / "omega_occurrence.json");
    write_json_file({{"spearman", wilks::matrix_to_json(model.amounts.spearman)},
                     {"raw", wilks::matrix_to_json(model.amounts.raw)},
                     {"omega", wilks::matrix_to_json(model.amounts.omega)}},
                    dir / "omega_amounts.json");
    write_json_file(wilks::to_json(model.amounts.marginals), dir / "amounts.json");
}

wilks::WilksModel load_wilks(const fs::path& dir) {
    const auto h = read_header(dir, wilks::kGeneratorName);
    wilks::WilksModel model;
    try {
        model.config = wilks::config_from_json(h.at("config"));
        model.grid = grid_from_json(h.at("grid"));
        model.calendar = calendar_from_json(h.at("calendar"));
        model.initial_wet = h.at("initial_wet").get<std::vector<std::uint8_t>>();
        const auto& c = h.at("occurrence_calibration");
        auto& oc = model.occurrence_correlation;
        oc.repair = wilks::repair_log_from_json(c.at("repair"));
        oc.max_abs_residual = c.at("max_abs_residual").get<double>();
        oc.clamped_pairs = c.at("clamped_pairs").get<std::size_t>();
        oc.degenerate_pairs = c.at("degenerate_pairs").get<std::size_t>();
        model.amounts.repair = wilks::repair_log_from_json(h.at("amount_correlation").at("repair"));

        const auto occ = read_required(dir / "omega_occurrence.json");
        oc.observed = wilks::matrix_from_json(occ.at("observed"));
        oc.raw = wilks::matrix_from_json(occ.at("raw"));
        oc.omega = wilks::matrix_from_json(occ.at("omega"));
        const auto amt = read_required(dir / "omega_amounts.json");
        model.amounts.spearman = wilks::matrix_from_json(amt.at("spearman"));
        model.amounts.raw = wilks::matrix_from_json(amt.at("raw"));
        model.amounts.omega = wilks::matrix_from_json(amt.at("omega"));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(dir.string() + ": malformed Wilks bundle: " + e.what());
    }
    model.occurrence = glm::glm_from_json(read_required(dir / "glm.json"));
    model.amounts.marginals = wilks::amounts_from_json(read_required(dir / "amounts.json"));

    const std::size_t n = model.grid.site_count();
    const auto rows = [](const Eigen::MatrixXd& m) { return static_cast<std::size_t>(m.rows()); };
    if (model.occurrence.sites != n || model.amounts.marginals.site_count() != n || model.initial_wet.size() != n ||
        rows(model.occurrence_correlation.omega) != n || rows(model.amounts.omega) != n) {
        throw DataError(dir.string() + ": Wilks bundle components disagree with the grid site count");
    }
    if (!wilks::is_correlation_matrix(model.occurrence_correlation.omega) ||
        !wilks::is_correlation_matrix(model.amounts.omega)) {
        throw DataError(dir.string() + ": stored correlation matrices are not valid correlation matrices");
    }
    wilks::refresh_factors(model);
    return model;
}

std::string generator_of(const fs::path& dir) {
    return read_header(dir, "").at("generator").get<std::string>();
}

std::pair<GridSpec, Calendar> training_domain(const fs::path& dir) {
    const auto h = read_header(dir, "");
    try {
        return {grid_from_json(h.at("grid")), calendar_from_json(h.at("calendar"))};
    } catch (const nlohmann::json::exception& e) {
        throw DataError((dir / "bundle.json").string() + ": " + e.what());
    }
}

} // namespace precipgen::bundle
