#pragma once

#include "precipgen/markov.hpp"
#include "precipgen/observations.hpp"

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace precipgen::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// values(t, s) for every day and site.
ObservationSet make_observations(const GridSpec& grid, const Calendar& calendar,
                                 const std::function<float(std::size_t, std::size_t)>& values);

// Brute-force oracles, written independently of the library code paths.

/// Sorts a copy; linear interpolation at h = (n - 1) * level.
double brute_quantile(std::vector<double> sample, double level);

/// Run lengths of consecutive `wet == want` entries, in order of occurrence.
std::vector<std::size_t> brute_runs(const std::vector<bool>& wet, bool want);

struct BruteMoments {
    double mean = 0.0;
    double sd = 0.0;       // population
    double skewness = 0.0; // m3 / m2^1.5
    double kurtosis = 0.0; // m4 / m2^2
};
BruteMoments brute_moments(const std::vector<double>& x);

/// Stationary distribution of a row-stochastic 3x3 matrix by power iteration.
std::array<double, 3> stationary(const markov::Matrix3& p);

/// Long-run state frequencies of each calendar month under a monthly chain,
/// from the exact distribution propagated day by day over `years` years
/// starting from `initial`, ignoring the first year.
std::array<std::array<double, 3>, 12> monthly_state_frequencies(const std::array<markov::Matrix3, 12>& p,
                                                                markov::State initial, int years);

} // namespace precipgen::test
