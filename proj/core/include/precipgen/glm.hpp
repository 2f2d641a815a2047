#pragma once

#include "precipgen/observations.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <vector>

namespace precipgen::glm {

/// Day pairs (t-1, t) of one (site, month) cell by previous/current occurrence.
struct TransitionCounts {
    double dry_dry = 0.0;
    double dry_wet = 0.0;
    double wet_dry = 0.0;
    double wet_wet = 0.0;

    [[nodiscard]] double from_dry() const noexcept { return dry_dry + dry_wet; }
    [[nodiscard]] double from_wet() const noexcept { return wet_dry + wet_wet; }
    [[nodiscard]] double total() const noexcept { return from_dry() + from_wet(); }
};

double logistic(double x) noexcept;
double logit(double p) noexcept;

/// Smoothed frequencies p01 = (n01 + a) / (n0 + 2a), p11 = (n11 + a) / (n1 + 2a).
struct TransitionProbabilities {
    double p01 = 0.0;
    double p11 = 0.0;
};
TransitionProbabilities closed_form(const TransitionCounts& counts, double pseudo);

struct LogitFit {
    double beta0 = 0.0;
    double beta1 = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Maximum-likelihood logistic regression of wet_t on the wet_{t-1} indicator
/// by iteratively reweighted least squares, with `pseudo` added to each of the
/// four outcome weights. Requires a nonzero weight in every outcome.
LogitFit fit_logistic(const TransitionCounts& counts, double pseudo, int max_iterations = 100,
                      double tolerance = 1e-13);

struct CellFit {
    double beta0 = 0.0;
    double beta1 = 0.0;
    double p01 = 0.0;
    double p11 = 0.0;
    TransitionCounts counts;
    /// 0: logistic fit; 1: closed form (a zero outcome weight, the MLE is at
    /// infinite coefficients); 2: climatological fallback for a group without pairs.
    int method = 0;

    /// Long-run wet probability of the two-state chain, p01 / (1 + p01 - p11).
    [[nodiscard]] double stationary_wet() const noexcept;
};

/// Per-site binary occurrence wet_i(t) = value >= wet_threshold, [day][site].
struct Occurrence {
    std::size_t days = 0;
    std::size_t sites = 0;
    std::vector<std::uint8_t> wet;

    [[nodiscard]] bool operator()(std::size_t t, std::size_t s) const noexcept { return wet[t * sites + s] != 0; }
};
Occurrence occurrence(const PrecipMatrix& values, double wet_threshold);

struct GlmOccurrenceModel {
    std::size_t sites = 0;
    double wet_threshold = 0.3;
    double pseudo = 0.0;
    std::vector<CellFit> cells; // [site * 12 + month - 1]

    [[nodiscard]] const CellFit& cell(std::size_t site, int month) const { return cells.at(site * 12 + month - 1); }
};

/// Counts pairs by the month of day t, then fits each (site, month) cell. A
/// group (from dry or from wet) with no pairs takes the climatological wet
/// fraction of the site in that month (of the whole record when the month is
/// absent).
GlmOccurrenceModel fit_glm_occurrence(const ObservationSet& obs, double wet_threshold, double pseudo);
GlmOccurrenceModel fit_glm_occurrence(const Occurrence& occ, const Calendar& calendar, double wet_threshold,
                                      double pseudo);

nlohmann::json to_json(const GlmOccurrenceModel& model);
GlmOccurrenceModel glm_from_json(const nlohmann::json& j);

} // namespace precipgen::glm
