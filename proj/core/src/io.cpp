#include "precipgen/io.hpp"

#include "precipgen/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <vector>

namespace precipgen {

namespace fs = std::filesystem;
namespace chr = std::chrono;

namespace {

struct Row {
    std::size_t line = 0;
    int sim_id = 0;
    CivilDate date{};
    double lat = 0.0;
    double lon = 0.0;
    float value = 0.0f;
};

std::string where(const fs::path& path, std::size_t line) {
    return path.string() + ":" + std::to_string(line);
}

template <typename T>
T parse_number(std::string_view field, const fs::path& path, std::size_t line, const char* name) {
    T value{};
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size()) {
        throw DataError(where(path, line) + ": cannot parse " + name + " '" + std::string(field) + "'");
    }
    return value;
}

std::vector<Row> parse_csv(const fs::path& path, bool with_sim_id) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    const std::string expected = with_sim_id ? "sim_id,date,lat,lon,precip_mm" : "date,lat,lon,precip_mm";
    const std::size_t n_fields = with_sim_id ? 5 : 4;

    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) {
        throw DataError(path.string() + ": empty file");
    }
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
        line.erase(0, 3);
    }
    if (line != expected) {
        throw DataError(where(path, 1) + ": header must be '" + expected + "'");
    }

    std::vector<Row> rows;
    std::vector<std::string_view> fields;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        fields.clear();
        std::string_view rest(line);
        while (true) {
            const auto comma = rest.find(',');
            fields.push_back(rest.substr(0, comma));
            if (comma == std::string_view::npos) {
                break;
            }
            rest.remove_prefix(comma + 1);
        }
        if (fields.size() != n_fields) {
            throw DataError(where(path, line_no) + ": expected " + std::to_string(n_fields) + " fields, got " +
                            std::to_string(fields.size()));
        }
        Row row;
        row.line = line_no;
        std::size_t f = 0;
        if (with_sim_id) {
            row.sim_id = parse_number<int>(fields[f++], path, line_no, "sim_id");
        }
        try {
            row.date = parse_date(fields[f++]);
        } catch (const DataError& e) {
            throw DataError(where(path, line_no) + ": " + e.what());
        }
        row.lat = parse_number<double>(fields[f++], path, line_no, "lat");
        row.lon = parse_number<double>(fields[f++], path, line_no, "lon");
        row.value = parse_number<float>(fields[f++], path, line_no, "precip_mm");
        if (!std::isfinite(row.value)) {
            throw DataError(where(path, line_no) + ": non-finite precipitation");
        }
        if (row.value < 0.0f) {
            throw DataError(where(path, line_no) + ": negative precipitation " + std::string(fields[f - 1]));
        }
        rows.push_back(row);
    }
    if (rows.empty()) {
        throw DataError(path.string() + ": no data rows");
    }
    return rows;
}

double infer_axis(const std::set<double>& values, double fallback, double& lo, double& hi) {
    std::vector<double> v(values.begin(), values.end());
    double res = fallback;
    if (v.size() > 1) {
        res = std::numeric_limits<double>::infinity();
        for (std::size_t i = 1; i < v.size(); ++i) {
            res = std::min(res, v[i] - v[i - 1]);
        }
    }
    // Snap to a clean decimal so that bounds are exact multiples.
    res = std::round(res * 1e9) / 1e9;
    lo = std::round((v.front() - 0.5 * res) * 1e9) / 1e9;
    hi = std::round((v.back() + 0.5 * res) * 1e9) / 1e9;
    return res;
}

GridSpec infer_grid(const std::vector<Row>& rows, double fallback_resolution) {
    std::set<double> lats;
    std::set<double> lons;
    for (const auto& r : rows) {
        lats.insert(r.lat);
        lons.insert(r.lon);
    }
    double lat_lo = 0;
    double lat_hi = 0;
    double lon_lo = 0;
    double lon_hi = 0;
    double res_lat = infer_axis(lats, fallback_resolution, lat_lo, lat_hi);
    double res_lon = infer_axis(lons, fallback_resolution, lon_lo, lon_hi);
    if (lats.size() == 1 && lons.size() > 1) {
        res_lat = res_lon;
        infer_axis(lats, res_lat, lat_lo, lat_hi);
    } else if (lons.size() == 1 && lats.size() > 1) {
        res_lon = res_lat;
        infer_axis(lons, res_lon, lon_lo, lon_hi);
    }
    if (std::abs(res_lat - res_lon) > 1e-9) {
        throw DataError("cannot infer a square grid: latitude spacing " + format_number(res_lat) +
                        " differs from longitude spacing " + format_number(res_lon));
    }
    try {
        return GridSpec(lat_lo, lat_hi, lon_lo, lon_hi, res_lat);
    } catch (const ConfigError& e) {
        throw DataError(std::string("cannot infer grid: ") + e.what());
    }
}

Calendar infer_calendar(const std::vector<Row>& rows) {
    auto lo = chr::sys_days{rows.front().date};
    auto hi = lo;
    for (const auto& r : rows) {
        const auto d = chr::sys_days{r.date};
        lo = std::min(lo, d);
        hi = std::max(hi, d);
    }
    return Calendar(CivilDate{lo}, CivilDate{hi});
}

/// Places rows into a matrix, enforcing exactly-once coverage.
PrecipMatrix assemble(const fs::path& path, const std::vector<const Row*>& rows, const GridSpec& grid,
                      const Calendar& calendar, const std::string& what) {
    const std::size_t days = calendar.day_count();
    const std::size_t sites = grid.site_count();
    PrecipMatrix values(days, sites);
    std::vector<unsigned char> seen(days * sites, 0);
    for (const Row* r : rows) {
        const std::size_t t = calendar.index_of(r->date);
        if (t == Calendar::npos) {
            throw DataError(where(path, r->line) + ": date " + format_date(r->date) + " outside calendar " +
                            format_date(calendar.start()) + ".." + format_date(calendar.end()));
        }
        const auto site = grid.find_site(r->lat, r->lon);
        if (!site) {
            throw DataError(where(path, r->line) + ": (" + format_number(r->lat) + ", " + format_number(r->lon) +
                            ") is not a grid site");
        }
        auto& flag = seen[t * sites + *site];
        if (flag) {
            throw DataError(where(path, r->line) + ": duplicate record for " + format_date(r->date) + " at (" +
                            format_number(r->lat) + ", " + format_number(r->lon) + ")");
        }
        flag = 1;
        values(t, *site) = r->value;
    }
    for (std::size_t t = 0; t < days; ++t) {
        for (std::size_t s = 0; s < sites; ++s) {
            if (!seen[t * sites + s]) {
                const auto ll = grid.site(s);
                throw DataError(path.string() + ": " + what + " missing record for " + format_date(calendar.date(t)) +
                                " at (" + format_number(ll.lat) + ", " + format_number(ll.lon) + ")");
            }
        }
    }
    return values;
}

std::string format_coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    std::string s(buf);
    while (!s.empty() && s.back() == '0') {
        s.pop_back();
    }
    if (!s.empty() && s.back() == '.') {
        s.pop_back();
    }
    if (s == "-0") {
        s = "0";
    }
    return s;
}

std::vector<std::string> coord_strings(const GridSpec& grid) {
    std::vector<std::string> out(grid.site_count());
    for (std::size_t s = 0; s < grid.site_count(); ++s) {
        const auto ll = grid.site(s);
        out[s] = format_coord(ll.lat) + "," + format_coord(ll.lon);
    }
    return out;
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    return out;
}

} // namespace

std::string format_number(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

std::string format_number(float value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

ObservationSet load_observations(const fs::path& path, const GridSpec& grid, const Calendar& calendar) {
    const auto rows = parse_csv(path, false);
    std::vector<const Row*> ptrs;
    ptrs.reserve(rows.size());
    for (const auto& r : rows) {
        ptrs.push_back(&r);
    }
    return ObservationSet(grid, calendar, assemble(path, ptrs, grid, calendar, "observations"));
}

ObservationSet load_observations(const fs::path& path, double fallback_resolution) {
    const auto rows = parse_csv(path, false);
    const GridSpec grid = infer_grid(rows, fallback_resolution);
    const Calendar calendar = infer_calendar(rows);
    std::vector<const Row*> ptrs;
    ptrs.reserve(rows.size());
    for (const auto& r : rows) {
        ptrs.push_back(&r);
    }
    return ObservationSet(grid, calendar, assemble(path, ptrs, grid, calendar, "observations"));
}

void write_observations(const ObservationSet& obs, const fs::path& path) {
    auto out = open_out(path);
    out << "date,lat,lon,precip_mm\n";
    const auto coords = coord_strings(obs.grid());
    std::string buf;
    for (std::size_t t = 0; t < obs.day_count(); ++t) {
        const std::string date = format_date(obs.calendar().date(t));
        const auto row = obs.values().day(t);
        buf.clear();
        for (std::size_t s = 0; s < row.size(); ++s) {
            buf += date;
            buf += ',';
            buf += coords[s];
            buf += ',';
            buf += format_number(row[s]);
            buf += '\n';
        }
        out << buf;
    }
    if (!out) {
        throw DataError("failed writing " + path.string());
    }
}

fs::path metadata_path_for(const fs::path& csv_path) {
    return csv_path.has_parent_path() ? csv_path.parent_path() / "metadata.json" : fs::path("metadata.json");
}

nlohmann::json to_json(const GridSpec& grid) {
    return {{"lat_min", grid.lat_min()}, {"lat_max", grid.lat_max()}, {"lon_min", grid.lon_min()},
            {"lon_max", grid.lon_max()}, {"resolution", grid.resolution()}, {"site_count", grid.site_count()}};
}

GridSpec grid_from_json(const nlohmann::json& j) {
    try {
        return GridSpec(j.at("lat_min").get<double>(), j.at("lat_max").get<double>(), j.at("lon_min").get<double>(),
                        j.at("lon_max").get<double>(), j.at("resolution").get<double>());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("invalid grid description: ") + e.what());
    }
}

nlohmann::json to_json(const Calendar& calendar) {
    return {{"start", format_date(calendar.start())},
            {"end", format_date(calendar.end())},
            {"day_count", calendar.day_count()}};
}

Calendar calendar_from_json(const nlohmann::json& j) {
    try {
        return Calendar(parse_date(j.at("start").get<std::string>()), parse_date(j.at("end").get<std::string>()));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("invalid calendar description: ") + e.what());
    }
}

void write_simulations(const SimulationSet& sims, const fs::path& path) {
    sims.validate();
    std::vector<const Realization*> order;
    for (const auto& r : sims.realizations()) {
        order.push_back(&r);
    }
    std::sort(order.begin(), order.end(),
              [](const Realization* a, const Realization* b) { return a->info.sim_id < b->info.sim_id; });

    {
        auto out = open_out(path);
        out << "sim_id,date,lat,lon,precip_mm\n";
        const auto coords = coord_strings(sims.grid());
        std::vector<std::string> dates(sims.calendar().day_count());
        for (std::size_t t = 0; t < dates.size(); ++t) {
            dates[t] = format_date(sims.calendar().date(t));
        }
        std::string buf;
        for (const Realization* r : order) {
            const std::string id = std::to_string(r->info.sim_id);
            for (std::size_t t = 0; t < r->values.days(); ++t) {
                buf.clear();
                const auto row = r->values.day(t);
                for (std::size_t s = 0; s < row.size(); ++s) {
                    buf += id;
                    buf += ',';
                    buf += dates[t];
                    buf += ',';
                    buf += coords[s];
                    buf += ',';
                    buf += format_number(row[s]);
                    buf += '\n';
                }
                out << buf;
            }
        }
        if (!out) {
            throw DataError("failed writing " + path.string());
        }
    }

    nlohmann::json meta;
    meta["format"] = "precipgen-simulations";
    meta["version"] = 1;
    meta["grid"] = to_json(sims.grid());
    meta["calendar"] = to_json(sims.calendar());
    meta["generator"] = sims.generator();
    meta["seed"] = sims.master_seed();
    meta["year_aligned"] = sims.year_aligned();
    meta["data_file"] = path.filename().string();
    auto reals = nlohmann::json::array();
    for (const Realization* r : order) {
        reals.push_back({{"sim_id", r->info.sim_id}, {"seed", r->info.seed}, {"generator", r->info.generator}});
    }
    meta["realizations"] = std::move(reals);
    write_json_file(meta, metadata_path_for(path));
}

SimulationSet read_simulations(const fs::path& path) {
    const auto rows = parse_csv(path, true);

    GridSpec grid;
    Calendar calendar;
    std::string generator = path.stem().string();
    std::uint64_t seed = 0;
    bool year_aligned = true;
    std::map<int, RealizationInfo> infos;

    const fs::path meta_path = metadata_path_for(path);
    if (fs::exists(meta_path)) {
        const auto meta = read_json_file(meta_path);
        try {
            grid = grid_from_json(meta.at("grid"));
            calendar = calendar_from_json(meta.at("calendar"));
            generator = meta.value("generator", generator);
            seed = meta.value("seed", std::uint64_t{0});
            year_aligned = meta.value("year_aligned", true);
            if (meta.contains("realizations")) {
                for (const auto& r : meta.at("realizations")) {
                    RealizationInfo info;
                    info.sim_id = r.at("sim_id").get<int>();
                    info.seed = r.value("seed", std::uint64_t{0});
                    info.generator = r.value("generator", generator);
                    infos[info.sim_id] = info;
                }
            }
        } catch (const nlohmann::json::exception& e) {
            throw DataError(meta_path.string() + ": " + e.what());
        }
    } else {
        grid = infer_grid(rows, 0.05);
        calendar = infer_calendar(rows);
    }

    std::map<int, std::vector<const Row*>> by_sim;
    for (const auto& r : rows) {
        by_sim[r.sim_id].push_back(&r);
    }
    SimulationSet sims(grid, calendar, generator, seed, year_aligned);
    for (const auto& [id, sim_rows] : by_sim) {
        Realization real;
        real.info = infos.count(id) ? infos.at(id) : RealizationInfo{id, 0, generator};
        real.values = assemble(path, sim_rows, grid, calendar, "simulation " + std::to_string(id));
        sims.add(std::move(real));
    }
    return sims;
}

nlohmann::json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void write_json_file(const nlohmann::json& j, const fs::path& path) {
    auto out = open_out(path);
    out << j.dump(2) << '\n';
    if (!out) {
        throw DataError("failed writing " + path.string());
    }
}

} // namespace precipgen
