#pragma once

#include "precipgen/observations.hpp"

#include <nlohmann/json.hpp>

#include <span>
#include <vector>

namespace precipgen::arima {

struct ArimaOrder {
    int p = 1;
    int d = 0;
    int q = 0;

    friend bool operator==(const ArimaOrder&, const ArimaOrder&) = default;
};

/// ARIMA(p, d, q) on an annual series:
///   x_t = sum_i ar[i] x_{t-1-i} + e_t + sum_j ma[j] e_{t-1-j}
/// where x is the d-times differenced series minus `mean` (mean is 0 for d > 0).
struct ArimaModel {
    ArimaOrder order;
    std::vector<double> ar;
    std::vector<double> ma;
    double mean = 0.0;                // mm/year
    double innovation_variance = 0.0; // (mm/year)^2
    double residual_mean = 0.0;
    double residual_variance = 0.0;
    std::size_t n_observations = 0;
};

/// Minimum series length accepted for an order: max(8, 3 (p + d + q + 1)).
std::size_t minimum_length(const ArimaOrder& order);

/// Conditional least squares on the differenced, demeaned series. Pure AR
/// orders are solved exactly by linear least squares; MA terms start from a
/// Hannan-Rissanen estimate refined by Levenberg-Marquardt. Throws ConfigError
/// for invalid orders, DataError for short series or non-causal /
/// non-invertible fits.
ArimaModel fit(std::span<const double> series, const ArimaOrder& order);

/// True when all roots of 1 - c_1 z - ... - c_k z^k lie outside the unit circle.
bool roots_outside_unit_circle(std::span<const double> coefficients);

struct AnnualTotals {
    std::vector<int> years;
    std::vector<double> totals; // mm/year of the regional mean
};

/// Sum over each complete calendar year of the daily regional mean.
AnnualTotals annual_totals(const ObservationSet& obs);

/// fit() applied to the complete-year annual totals of obs.
ArimaModel fit_annual_trend(const ObservationSet& obs, const ArimaOrder& order = {});

/// One-step-ahead conditional mean given `history` (oldest first). Throws
/// DataError when history is shorter than p + d.
double project_annual_total(const ArimaModel& model, std::span<const double> history);

nlohmann::json to_json(const ArimaModel& model);
ArimaModel model_from_json(const nlohmann::json& j);

} // namespace precipgen::arima
