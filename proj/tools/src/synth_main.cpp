#include "precipgen/error.hpp"
#include "precipgen/io.hpp"
#include "precipgen/synthetic.hpp"
#include "precipgen/version.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    using namespace precipgen;
    CLI::App app{"precipgen-synth: write synthetic oracle observations"};
    app.set_version_flag("--version", kVersion);
    std::string oracle = "monsoon";
    std::size_t n_lat = 2;
    std::size_t n_lon = 2;
    int first_year = 1981;
    int last_year = 2009;
    std::uint64_t seed = 1;
    std::string out;
    app.add_option("--oracle", oracle, "monsoon, persistent or interannual")
        ->check(CLI::IsMember({"monsoon", "persistent", "interannual"}));
    app.add_option("--n-lat", n_lat, "Grid rows")->check(CLI::Range(1, 1000));
    app.add_option("--n-lon", n_lon, "Grid columns")->check(CLI::Range(1, 1000));
    app.add_option("--first-year", first_year);
    app.add_option("--last-year", last_year);
    app.add_option("--seed", seed);
    app.add_option("--out", out, "Observations CSV")->required();
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    try {
        const auto cfg = oracle == "persistent"    ? persistent_oracle_config(seed)
                         : oracle == "interannual" ? interannual_oracle_config(seed)
                                                   : monsoon_oracle_config(seed);
        const auto obs = synthesize_observations(cfg, oracle_grid(n_lat, n_lon), Calendar::years(first_year, last_year));
        write_observations(obs, out);
        std::cout << "wrote " << obs.site_count() << " sites x " << obs.day_count() << " days to " << out << '\n';
    } catch (const ConfigError& e) {
        std::cerr << "precipgen-synth: configuration error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "precipgen-synth: error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
