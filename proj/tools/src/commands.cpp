#include "precipgen/cli/commands.hpp"

#include "precipgen/bundle.hpp"
#include "precipgen/error.hpp"
#include "precipgen/hash.hpp"
#include "precipgen/io.hpp"
#include "precipgen/version.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace precipgen::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kMonthNames[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                       "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};

fs::path require(const std::optional<fs::path>& p, const char* field) {
    if (!p || p->empty()) {
        throw ConfigError(std::string(field) + ": required for this command");
    }
    return *p;
}

std::string fixed(double v, int digits = 3) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

ObservationSet load_checked_observations(const RunConfig& config) {
    const auto path = require(config.observations, "observations");
    if (!fs::exists(path)) {
        throw DataError("observations file not found: " + path.string());
    }
    auto obs = load_observations(path, config.grid ? config.grid->resolution() : 0.05);
    if (config.grid && !obs.grid().compatible_with(*config.grid)) {
        throw DataError(path.string() + ": observation grid (" + std::to_string(obs.grid().n_lat()) + "x" +
                        std::to_string(obs.grid().n_lon()) + ") differs from the configured grid (" +
                        std::to_string(config.grid->n_lat()) + "x" + std::to_string(config.grid->n_lon()) + ")");
    }
    return obs;
}

std::vector<fs::path> files_in(const fs::path& dir, const std::set<std::string>& skip = {"manifest.json"}) {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && !skip.count(e.path().filename().string())) {
            out.push_back(e.path());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

void print_transitions(const markov::MonthlyTransitionModel& tm, std::ostream& log) {
    log << "transition probabilities (rows D/W/E -> D W E):\n";
    for (std::size_t m = 0; m < markov::kMonths; ++m) {
        log << "  " << kMonthNames[m];
        for (std::size_t i = 0; i < markov::kStates; ++i) {
            log << (i == 0 ? "  " : " | ");
            for (std::size_t j = 0; j < markov::kStates; ++j) {
                log << (j ? " " : "") << fixed(tm.probability[m][i][j], 2);
            }
        }
        log << '\n';
    }
}

void fit_semiparametric(const RunConfig& config, const ObservationSet& obs, const fs::path& dir, std::ostream& log) {
    const auto model = semiparametric::fit(obs, config.semiparametric);
    bundle::save(model, dir, *config.observations);
    print_transitions(model.transitions, log);
    if (model.arima) {
        const auto& a = *model.arima;
        log << "ARIMA(" << a.order.p << "," << a.order.d << "," << a.order.q << ") on "
            << model.observed_annual.totals.size() << " annual totals:";
        for (std::size_t i = 0; i < a.ar.size(); ++i) {
            log << " ar" << i + 1 << "=" << fixed(a.ar[i]);
        }
        for (std::size_t i = 0; i < a.ma.size(); ++i) {
            log << " ma" << i + 1 << "=" << fixed(a.ma[i]);
        }
        log << " mean=" << fixed(a.mean, 1) << " innovation_sd=" << fixed(std::sqrt(a.innovation_variance), 1)
            << '\n';
    } else {
        log << "ARIMA: not fitted (annual conditioning disabled and too few years)\n";
    }
    log << "resampling library: " << model.library.entries().size() << " day pairs\n";
}

void fit_wilks(const RunConfig& config, const ObservationSet& obs, const fs::path& dir, std::ostream& log) {
    const auto model = wilks::fit(obs, config.wilks, config.jobs);
    bundle::save(model, dir);
    std::array<std::size_t, 3> methods{};
    for (const auto& c : model.occurrence.cells) {
        ++methods[static_cast<std::size_t>(c.method)];
    }
    log << "occurrence GLM cells: " << methods[0] << " logistic, " << methods[1] << " closed form, " << methods[2]
        << " climatological\n";
    const auto& oc = model.occurrence_correlation;
    log << "occurrence calibration: max |residual|=" << std::scientific << std::setprecision(2)
        << oc.max_abs_residual << std::defaultfloat << ", clamped pairs=" << oc.clamped_pairs
        << ", degenerate pairs=" << oc.degenerate_pairs << ", PSD repair " << (oc.repair.clipped ? "applied" : "not needed")
        << " (min eigenvalue " << fixed(oc.repair.min_eigenvalue, 4) << ")\n";
    log << "amount correlation: PSD repair " << (model.amounts.repair.clipped ? "applied" : "not needed")
        << " (min eigenvalue " << fixed(model.amounts.repair.min_eigenvalue, 4) << ")\n";
}

std::string sanitize_label(const std::string& s) {
    std::string out;
    for (char ch : s) {
        const bool ok = std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' || ch == '.';
        out.push_back(ok ? ch : '_');
    }
    if (out.empty() || out == "." || out == "..") {
        out = "source";
    }
    return out;
}

void print_table(const std::vector<report::SummaryRow>& rows, std::ostream& log) {
    if (rows.empty()) {
        return;
    }
    const auto& head = rows.front();
    std::vector<std::size_t> width(head.size());
    for (std::size_t c = 0; c < head.size(); ++c) {
        width[c] = head[c].first.size();
        for (const auto& r : rows) {
            width[c] = std::max(width[c], r[c].second.size());
        }
    }
    for (std::size_t c = 0; c < head.size(); ++c) {
        log << (c ? "  " : "") << std::left << std::setw(static_cast<int>(width[c])) << head[c].first;
    }
    log << '\n';
    for (const auto& r : rows) {
        for (std::size_t c = 0; c < r.size(); ++c) {
            log << (c ? "  " : "") << std::left << std::setw(static_cast<int>(width[c])) << r[c].second;
        }
        log << '\n';
    }
    log << std::right;
}

void collect_report_dirs(const fs::path& p, std::vector<fs::path>& out) {
    if (fs::exists(p / "report.json")) {
        out.push_back(p);
        return;
    }
    if (!fs::is_directory(p)) {
        throw DataError("not a report directory: " + p.string());
    }
    std::vector<fs::path> found;
    for (const auto& e : fs::directory_iterator(p)) {
        if (e.is_directory() && fs::exists(e.path() / "report.json")) {
            found.push_back(e.path());
        }
    }
    if (found.empty()) {
        throw DataError("no report.json under " + p.string());
    }
    std::sort(found.begin(), found.end());
    out.insert(out.end(), found.begin(), found.end());
}

} // namespace

json manifest(const std::string& command, const RunConfig& config,
              const std::vector<std::pair<std::string, fs::path>>& inputs, const std::vector<fs::path>& outputs,
              const json& extra) {
    json j;
    j["tool"] = "precipgen";
    j["version"] = kVersion;
    j["command"] = command;
    j["config"] = to_json(config);
    auto in = json::array();
    for (const auto& [role, path] : inputs) {
        in.push_back({{"role", role}, {"path", path.string()}, {"sha256", sha256_file(path)}});
    }
    j["inputs"] = in;
    auto out = json::array();
    for (const auto& path : outputs) {
        out.push_back({{"path", path.filename().string()}, {"sha256", sha256_file(path)}});
    }
    j["outputs"] = out;
    if (!extra.is_null()) {
        j["diagnostics"] = extra;
    }
    return j;
}

void cmd_fit(const RunConfig& config, std::ostream& log) {
    const fs::path dir = config.out ? *config.out : require(config.bundle, "out");
    const auto obs = load_checked_observations(config);
    const auto gen = config.generator_name();
    log << "fitting " << gen << " on " << obs.site_count() << " sites x " << obs.day_count() << " days ("
        << obs.calendar().first_year() << "-" << obs.calendar().last_year() << ")\n";
    if (gen == semiparametric::kGeneratorName) {
        fit_semiparametric(config, obs, dir, log);
    } else {
        fit_wilks(config, obs, dir, log);
    }
    write_json_file(manifest("fit", config, {{"observations", *config.observations}}, files_in(dir)),
                    dir / "manifest.json");
    log << "bundle written to " << dir.string() << '\n';
}

void cmd_simulate(const RunConfig& config, std::ostream& log) {
    const auto dir = require(config.bundle, "bundle");
    const auto out = require(config.out, "out");
    if (!fs::is_directory(dir)) {
        throw DataError("bundle directory not found: " + dir.string());
    }
    const auto gen = bundle::generator_of(dir);
    if (config.generator && *config.generator != gen) {
        throw DataError(dir.string() + ": bundle holds a '" + gen + "' model but the configuration requests '" +
                        *config.generator + "'");
    }
    const auto [grid, training_calendar] = bundle::training_domain(dir);
    if (config.grid && !config.grid->compatible_with(grid)) {
        throw DataError(dir.string() + ": bundle grid (" + std::to_string(grid.n_lat()) + "x" +
                        std::to_string(grid.n_lon()) + ") differs from the requested grid (" +
                        std::to_string(config.grid->n_lat()) + "x" + std::to_string(config.grid->n_lon()) + ")");
    }
    const Calendar calendar = config.calendar.value_or(training_calendar);

    std::vector<std::pair<std::string, fs::path>> inputs;
    for (const auto& f : files_in(dir)) {
        inputs.emplace_back("bundle", f);
    }
    SimulationSet sims;
    json diag = nullptr;
    if (gen == semiparametric::kGeneratorName) {
        const auto model = bundle::load_semiparametric(dir);
        semiparametric::SimulationDiagnostics totals;
        sims = semiparametric::simulate(model, calendar, config.n_sims, config.seed, config.jobs, &totals);
        diag = {{"days", totals.days},
                {"fallback_counts", totals.fallback_counts},
                {"state_mismatches", totals.state_mismatches}};
        log << "candidate fallbacks: level1=" << totals.fallback_counts[1] << " level2=" << totals.fallback_counts[2]
            << " of " << totals.days << " days\n";
    } else {
        const auto model = bundle::load_wilks(dir);
        sims = wilks::simulate(model, calendar, config.n_sims, config.seed, config.jobs);
    }
    fs::create_directories(out);
    const auto csv = out / "simulations.csv";
    write_simulations(sims, csv);
    write_json_file(manifest("simulate", config, inputs, {csv, metadata_path_for(csv)}, diag), out / "manifest.json");
    log << "wrote " << sims.size() << " realizations x " << calendar.day_count() << " days x "
        << grid.site_count() << " sites to " << csv.string() << '\n';
}

void cmd_evaluate(const RunConfig& config, std::ostream& log) {
    const auto out = require(config.out, "out");
    if (config.simulations.empty()) {
        throw ConfigError("simulations: at least one simulations file is required");
    }
    const auto obs = load_checked_observations(config);
    fs::create_directories(out);

    std::vector<std::pair<std::string, fs::path>> inputs{{"observations", *config.observations}};
    std::vector<report::SummaryRow> rows;
    std::vector<fs::path> outputs;
    std::map<std::string, int> used;
    for (std::size_t i = 0; i < config.simulations.size(); ++i) {
        const auto& path = config.simulations[i];
        if (!fs::exists(path)) {
            throw DataError("simulations file not found: " + path.string());
        }
        const auto sims = read_simulations(path);
        inputs.emplace_back("simulations", path);
        if (fs::exists(metadata_path_for(path))) {
            inputs.emplace_back("metadata", metadata_path_for(path));
        }
        std::string label = sanitize_label(config.labels.empty() ? sims.generator() : config.labels[i]);
        if (const int n = ++used[label]; n > 1) {
            label += "-" + std::to_string(n);
        }
        const auto rep = report::build_report(obs, sims, config.evaluation, label);
        const auto dir = out / label;
        report::write_report(rep, dir);
        rows.push_back(report::summary_row(rep));
        outputs.push_back(dir / "report.json");
        log << "report for " << label << " (" << sims.size() << " realizations"
            << (sims.year_aligned() ? "" : ", year-free") << ") written to " << dir.string() << '\n';
    }
    const auto table = out / "comparison.csv";
    report::write_comparison(rows, table);
    outputs.insert(outputs.begin(), table);
    write_json_file(manifest("evaluate", config, inputs, outputs), out / "manifest.json");
    print_table(rows, log);
}

void cmd_report(const RunConfig& config, const std::vector<fs::path>& inputs, std::ostream& log) {
    std::vector<fs::path> dirs;
    const auto sources = inputs.empty() ? std::vector<fs::path>{require(config.out, "out")} : inputs;
    for (const auto& p : sources) {
        collect_report_dirs(p, dirs);
    }
    std::vector<report::SummaryRow> rows;
    for (const auto& d : dirs) {
        rows.push_back(report::read_summary(d));
    }
    print_table(rows, log);
    if (config.out && !inputs.empty()) {
        fs::create_directories(*config.out);
        const auto table = *config.out / "comparison.csv";
        report::write_comparison(rows, table);
        std::vector<std::pair<std::string, fs::path>> ins;
        for (const auto& d : dirs) {
            ins.emplace_back("report", d / "report.json");
        }
        write_json_file(manifest("report", config, ins, {table}), *config.out / "manifest.json");
    }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"precipgen: stochastic daily precipitation generators and evaluation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    std::optional<fs::path> config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> n_sims;
    std::optional<unsigned> jobs;
    std::optional<fs::path> out_dir;
    std::optional<fs::path> obs_path;
    std::optional<fs::path> bundle_dir;
    std::optional<std::string> generator;
    std::vector<fs::path> sims_paths;
    std::vector<std::string> labels;
    std::vector<fs::path> report_inputs;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "Output directory");
        sub->add_option("--jobs", jobs, "Worker threads")->check(CLI::Range(1u, 4096u));
    };
    auto* fit = app.add_subcommand("fit", "Fit a generator and write a model bundle");
    common(fit);
    fit->add_option("--obs", obs_path, "Observations CSV");
    fit->add_option("--generator", generator, "semiparametric or wilks");

    auto* sim = app.add_subcommand("simulate", "Simulate from a model bundle");
    common(sim);
    sim->add_option("--bundle", bundle_dir, "Model bundle directory");
    sim->add_option("--seed", seed, "Master seed");
    sim->add_option("--n-sims", n_sims, "Number of realizations");
    sim->add_option("--generator", generator, "Expected generator of the bundle");

    auto* eval = app.add_subcommand("evaluate", "Score simulations against observations");
    common(eval);
    eval->add_option("--obs", obs_path, "Observations CSV");
    eval->add_option("--sims", sims_paths, "Simulations CSV (repeatable)");
    eval->add_option("--label", labels, "Report label per --sims (repeatable)");

    auto* rep = app.add_subcommand("report", "Print the comparison table of existing reports");
    rep->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    rep->add_option("--out", out_dir, "Directory for comparison.csv");
    rep->add_option("dirs", report_inputs, "Report directories or evaluate output directories");

    std::vector<std::string> argv_rev(args.rbegin(), args.rend());
    if (!argv_rev.empty()) {
        argv_rev.pop_back();
    }
    try {
        app.parse(argv_rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        RunConfig config = config_path ? load_run_config(*config_path) : RunConfig{};
        if (seed) {
            config.seed = *seed;
        }
        if (n_sims) {
            config.n_sims = *n_sims;
        }
        if (jobs) {
            config.jobs = *jobs;
        }
        if (out_dir) {
            config.out = *out_dir;
        }
        if (obs_path) {
            config.observations = *obs_path;
        }
        if (bundle_dir) {
            config.bundle = *bundle_dir;
        }
        if (generator) {
            config.generator = *generator;
        }
        if (!sims_paths.empty()) {
            config.simulations = sims_paths;
            config.labels = labels;
        } else if (!labels.empty()) {
            config.labels = labels;
        }
        config.apply_thresholds();
        config.validate();

        if (fit->parsed()) {
            cmd_fit(config, out);
        } else if (sim->parsed()) {
            cmd_simulate(config, out);
        } else if (eval->parsed()) {
            cmd_evaluate(config, out);
        } else {
            cmd_report(config, report_inputs, out);
        }
    } catch (const ConfigError& e) {
        err << "precipgen: configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DataError& e) {
        err << "precipgen: data error: " << e.what() << '\n';
        return kExitData;
    } catch (const fs::filesystem_error& e) {
        err << "precipgen: data error: " << e.what() << '\n';
        return kExitData;
    } catch (const json::exception& e) {
        err << "precipgen: data error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        err << "precipgen: internal error: " << e.what() << '\n';
        return 1;
    }
    return kExitOk;
}

} // namespace precipgen::cli
