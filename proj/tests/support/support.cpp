#include "support.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unistd.h>

namespace precipgen::test {

namespace fs = std::filesystem;

TempDir::TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("precipgen-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ObservationSet make_observations(const GridSpec& grid, const Calendar& calendar,
                                 const std::function<float(std::size_t, std::size_t)>& values) {
    PrecipMatrix m(calendar.day_count(), grid.site_count());
    for (std::size_t t = 0; t < m.days(); ++t) {
        for (std::size_t s = 0; s < m.sites(); ++s) {
            m(t, s) = values(t, s);
        }
    }
    return ObservationSet(grid, calendar, std::move(m));
}

double brute_quantile(std::vector<double> sample, double level) {
    std::sort(sample.begin(), sample.end());
    const double h = static_cast<double>(sample.size() - 1) * level;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sample.size() - 1);
    return sample[lo] + (h - static_cast<double>(lo)) * (sample[hi] - sample[lo]);
}

std::vector<std::size_t> brute_runs(const std::vector<bool>& wet, bool want) {
    std::vector<std::size_t> runs;
    std::size_t current = 0;
    for (bool w : wet) {
        if (w == want) {
            ++current;
        } else if (current > 0) {
            runs.push_back(current);
            current = 0;
        }
    }
    if (current > 0) {
        runs.push_back(current);
    }
    return runs;
}

BruteMoments brute_moments(const std::vector<double>& x) {
    BruteMoments m;
    const double n = static_cast<double>(x.size());
    double s = 0.0;
    for (double v : x) {
        s += v;
    }
    m.mean = s / n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : x) {
        const double d = v - m.mean;
        m2 += std::pow(d, 2);
        m3 += std::pow(d, 3);
        m4 += std::pow(d, 4);
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    m.sd = std::sqrt(m2);
    m.skewness = m3 / std::pow(m2, 1.5);
    m.kurtosis = m4 / (m2 * m2);
    return m;
}

std::array<double, 3> stationary(const markov::Matrix3& p) {
    std::array<double, 3> v{1.0 / 3, 1.0 / 3, 1.0 / 3};
    for (int it = 0; it < 100000; ++it) {
        std::array<double, 3> next{};
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                next[j] += v[i] * p[i][j];
            }
        }
        v = next;
    }
    return v;
}

std::array<std::array<double, 3>, 12> monthly_state_frequencies(const std::array<markov::Matrix3, 12>& p,
                                                                markov::State initial, int years) {
    const Calendar cal = Calendar::years(2001, 2000 + years);
    std::array<double, 3> dist{};
    dist[markov::index(initial)] = 1.0;
    std::array<std::array<double, 3>, 12> sum{};
    std::array<double, 12> days{};
    for (std::size_t t = 0; t < cal.day_count(); ++t) {
        const int m = cal.month(t) - 1;
        std::array<double, 3> next{};
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                next[j] += dist[i] * p[m][i][j];
            }
        }
        dist = next;
        if (cal.year(t) > cal.first_year()) {
            for (int j = 0; j < 3; ++j) {
                sum[m][j] += dist[j];
            }
            days[m] += 1.0;
        }
    }
    for (int m = 0; m < 12; ++m) {
        for (int j = 0; j < 3; ++j) {
            sum[m][j] /= days[m];
        }
    }
    return sum;
}

} // namespace precipgen::test
