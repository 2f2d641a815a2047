#include "precipgen/stats.hpp"

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>

#include <array>
#include <numbers>
#include <numeric>

namespace precipgen::stats {

double quantile(std::span<const double> sample, double level) {
    std::vector<double> sorted(sample.begin(), sample.end());
    std::sort(sorted.begin(), sorted.end());
    return quantile_sorted(std::span<const double>(sorted), level);
}

double mean(std::span<const double> x) {
    if (x.empty()) {
        throw std::invalid_argument("mean of an empty sample");
    }
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_sd(std::span<const double> x) {
    if (x.size() < 2) {
        return 0.0;
    }
    const double m = mean(x);
    double ss = 0.0;
    for (double v : x) {
        ss += (v - m) * (v - m);
    }
    return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

double iqr(std::span<const double> x) {
    std::vector<double> sorted(x.begin(), x.end());
    std::sort(sorted.begin(), sorted.end());
    const std::span<const double> s(sorted);
    return quantile_sorted(s, 0.75) - quantile_sorted(s, 0.25);
}

double silverman_bandwidth(std::span<const double> x) {
    if (x.size() < 2) {
        return 0.0;
    }
    const double spread = std::min(sample_sd(x), iqr(x) / 1.34);
    return 0.9 * spread * std::pow(static_cast<double>(x.size()), -0.2);
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw std::invalid_argument("pearson: samples must have equal length >= 2");
    }
    const double mx = mean(x);
    const double my = mean(y);
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    return sxy / std::sqrt(sxx * syy);
}

std::vector<double> average_ranks(std::span<const double> x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(x.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i + 1;
        while (j < order.size() && x[order[j]] == x[order[i]]) {
            ++j;
        }
        const double avg = 0.5 * static_cast<double>(i + j - 1) + 1.0;
        for (std::size_t k = i; k < j; ++k) {
            ranks[order[k]] = avg;
        }
        i = j;
    }
    return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    return pearson(rx, ry);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
    if (p <= 0.0) {
        return -std::numeric_limits<double>::infinity();
    }
    if (p >= 1.0) {
        return std::numeric_limits<double>::infinity();
    }
    return boost::math::quantile(boost::math::normal_distribution<double>{}, p);
}

double gamma_quantile(double shape, double scale, double p) {
    if (p <= 0.0) {
        return 0.0;
    }
    if (p >= 1.0) {
        return std::numeric_limits<double>::infinity();
    }
    return boost::math::quantile(boost::math::gamma_distribution<double>{shape, scale}, p);
}

namespace {

struct LegendreRule {
    std::array<double, 10> w;
    std::array<double, 10> x;
    int n;
};

constexpr LegendreRule kLegendre6{{0.1713244923791705, 0.3607615730481384, 0.4679139345726904},
                                  {0.9324695142031522, 0.6612093864662647, 0.2386191860831970},
                                  3};
constexpr LegendreRule kLegendre12{{0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
                                    0.2031674267230659, 0.2334925365383547, 0.2491470458134029},
                                   {0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
                                    0.5873179542866171, 0.3678314989981802, 0.1252334085114692},
                                   6};
constexpr LegendreRule kLegendre20{{0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
                                    0.08327674157670475, 0.1019301198172404, 0.1181945319615184,
                                    0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
                                    0.1527533871307259},
                                   {0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
                                    0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
                                    0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
                                    0.07652652113349733},
                                   10};

/// Upper orthant P(X > h, Y > k), Drezner-Wesolowsky with Genz refinements.
double bivariate_upper(double h, double k, double r) {
    constexpr double tp = 2.0 * std::numbers::pi;
    const double ar = std::abs(r);
    const LegendreRule& g = ar < 0.3 ? kLegendre6 : (ar < 0.75 ? kLegendre12 : kLegendre20);
    double hk = h * k;
    double bvn = 0.0;
    if (ar < 0.925) {
        const double hs = (h * h + k * k) / 2.0;
        const double asr = std::asin(r) / 2.0;
        for (int i = 0; i < g.n; ++i) {
            for (double sign : {-1.0, 1.0}) {
                const double sn = std::sin(asr * (1.0 + sign * g.x[i]));
                bvn += g.w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
            }
        }
        return bvn * asr / tp + normal_cdf(-h) * normal_cdf(-k);
    }
    if (r < 0.0) {
        k = -k;
        hk = -hk;
    }
    if (ar < 1.0) {
        const double as = 1.0 - r * r;
        double a = std::sqrt(as);
        const double bs = (h - k) * (h - k);
        const double c = (4.0 - hk) / 8.0;
        const double d = (12.0 - hk) / 80.0;
        double asr = -(bs / as + hk) / 2.0;
        if (asr > -100.0) {
            bvn = a * std::exp(asr) * (1.0 - c * (bs - as) * (1.0 - d * bs) / 3.0 + c * d * as * as);
        }
        if (hk > -100.0) {
            const double b = std::sqrt(bs);
            const double sp = std::sqrt(tp) * normal_cdf(-b / a);
            bvn -= std::exp(-hk / 2.0) * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0);
        }
        a /= 2.0;
        double sum = 0.0;
        for (int i = 0; i < g.n; ++i) {
            for (double sign : {-1.0, 1.0}) {
                const double xi = a * (1.0 + sign * g.x[i]);
                const double xs = xi * xi;
                asr = -(bs / xs + hk) / 2.0;
                if (asr > -100.0) {
                    const double sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs);
                    const double rs = std::sqrt(1.0 - xs);
                    const double ep = std::exp(-(hk / 2.0) * xs / ((1.0 + rs) * (1.0 + rs))) / rs;
                    sum += g.w[i] * std::exp(asr) * (sp - ep);
                }
            }
        }
        bvn = (a * sum - bvn) / tp;
    }
    if (r > 0.0) {
        return bvn + normal_cdf(-std::max(h, k));
    }
    if (h >= k) {
        return -bvn;
    }
    const double l = h < 0.0 ? normal_cdf(k) - normal_cdf(h) : normal_cdf(-h) - normal_cdf(-k);
    return l - bvn;
}

} // namespace

double bivariate_normal_cdf(double h, double k, double rho) {
    rho = std::clamp(rho, -1.0, 1.0);
    if (std::isinf(h) || std::isinf(k)) {
        if (h == -std::numeric_limits<double>::infinity() || k == -std::numeric_limits<double>::infinity()) {
            return 0.0;
        }
        return std::isinf(h) ? normal_cdf(k) : normal_cdf(h);
    }
    if (rho == 0.0) {
        return normal_cdf(h) * normal_cdf(k);
    }
    return std::clamp(bivariate_upper(-h, -k, rho), 0.0, 1.0) + 0.0;
}

double ks_statistic(std::span<const double> sample, const std::function<double(double)>& cdf) {
    if (sample.empty()) {
        throw std::invalid_argument("ks_statistic: empty sample");
    }
    std::vector<double> sorted(sample.begin(), sample.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double f = cdf(sorted[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

double ks_statistic(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) {
        throw std::invalid_argument("ks_statistic: empty sample");
    }
    std::vector<double> x(a.begin(), a.end());
    std::vector<double> y(b.begin(), b.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    std::size_t i = 0;
    std::size_t j = 0;
    double d = 0.0;
    while (i < x.size() && j < y.size()) {
        const double v = std::min(x[i], y[j]);
        while (i < x.size() && x[i] == v) {
            ++i;
        }
        while (j < y.size() && y[j] == v) {
            ++j;
        }
        d = std::max(d, std::abs(static_cast<double>(i) / static_cast<double>(x.size()) -
                                 static_cast<double>(j) / static_cast<double>(y.size())));
    }
    return d;
}

} // namespace precipgen::stats
