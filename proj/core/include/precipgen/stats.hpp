#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace precipgen::stats {

/// Quantile of an ascending-sorted sample by linear interpolation between
/// order statistics: position h = (n - 1) * level, value x[floor h] +
/// (h - floor h) * (x[floor h + 1] - x[floor h]).
template <typename T>
double quantile_sorted(std::span<const T> sorted, double level) {
    if (sorted.empty()) {
        throw std::invalid_argument("quantile of an empty sample");
    }
    if (!(level >= 0.0 && level <= 1.0)) {
        throw std::invalid_argument("quantile level outside [0, 1]");
    }
    const double h = static_cast<double>(sorted.size() - 1) * level;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = h - static_cast<double>(lo);
    const double a = static_cast<double>(sorted[lo]);
    const double b = static_cast<double>(sorted[hi]);
    return a + frac * (b - a);
}

template <typename T>
std::vector<double> quantiles_sorted(std::span<const T> sorted, std::span<const double> levels) {
    std::vector<double> out;
    out.reserve(levels.size());
    for (double level : levels) {
        out.push_back(quantile_sorted(sorted, level));
    }
    return out;
}

/// Sorts a copy; O(n log n).
double quantile(std::span<const double> sample, double level);

double mean(std::span<const double> x);
/// Sample standard deviation (divides by n - 1); 0 when n < 2.
double sample_sd(std::span<const double> x);
/// Interquartile range under the interpolation convention above.
double iqr(std::span<const double> x);

/// Silverman's rule of thumb 0.9 * min(sd, IQR / 1.34) * n^(-1/5); 0 for n < 2.
double silverman_bandwidth(std::span<const double> x);

double pearson(std::span<const double> x, std::span<const double> y);
/// Ranks 1..n with ties receiving their average rank.
std::vector<double> average_ranks(std::span<const double> x);
double spearman(std::span<const double> x, std::span<const double> y);

double normal_cdf(double x);
double normal_quantile(double p);
/// Gamma(shape, scale) quantile.
double gamma_quantile(double shape, double scale, double p);

/// Bivariate standard normal CDF P(X <= h, Y <= k) with correlation rho, by
/// adaptive Gauss-Kronrod quadrature of Sheppard's integral in the angle
/// parameterisation (smooth for all |rho| <= 1).
double bivariate_normal_cdf(double h, double k, double rho);

/// One-sample Kolmogorov-Smirnov statistic against a continuous CDF.
double ks_statistic(std::span<const double> sample, const std::function<double(double)>& cdf);
/// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::span<const double> a, std::span<const double> b);

} // namespace precipgen::stats
