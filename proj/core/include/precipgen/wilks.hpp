#pragma once

#include "precipgen/glm.hpp"
#include "precipgen/observations.hpp"
#include "precipgen/random.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <span>
#include <vector>

namespace precipgen::wilks {

struct RepairLog {
    bool clipped = false;          // some eigenvalue moved by more than 1e-10
    double max_clip = 0.0;         // largest eigenvalue change
    double min_eigenvalue = 0.0;   // before repair
};

/// Clips negative eigenvalues to zero and rescales to unit diagonal.
RepairLog repair_psd(Eigen::MatrixXd& m);

/// Symmetric, unit diagonal, entries in [-1, 1], no eigenvalue below -tol.
bool is_correlation_matrix(const Eigen::MatrixXd& m, double tol = 1e-9);

/// One mixture component of the occurrence process of a site pair: the
/// fraction of days in a (month, previous-state) configuration and the two
/// sites' wet probabilities there.
struct PairConfiguration {
    double weight = 0.0;
    double p_i = 0.0;
    double p_j = 0.0;
};

/// Pearson correlation of the two binary indicators 1{Phi(w_i) <= p_i},
/// 1{Phi(w_j) <= p_j} for standard normals with correlation omega, pooled over
/// the configurations. NaN when either indicator is constant.
double predicted_binary_correlation(std::span<const PairConfiguration> configs, double omega);

struct CalibrationResult {
    double omega = 0.0;
    double residual = 0.0; // predicted minus target binary correlation
    int iterations = 0;
    bool clamped = false;  // target outside the attainable range
};

/// Bracketed TOMS 748 root search on [-1, 1] for the omega reproducing `target`. Throws DataError
/// when the residual exceeds `tolerance` after `max_iterations`.
CalibrationResult calibrate_pair(std::span<const PairConfiguration> configs, double target,
                                 double tolerance = 1e-6, int max_iterations = 200);

/// Single-configuration form: wet probabilities p_i, p_j on every day.
CalibrationResult calibrate_pair(double p_i, double p_j, double target, double tolerance = 1e-6,
                                 int max_iterations = 200);

/// Pearson correlation matrix of the binary occurrence series; NaN entries for
/// constant series.
Eigen::MatrixXd binary_correlation_matrix(const glm::Occurrence& occ);

struct OccurrenceCalibration {
    Eigen::MatrixXd observed;  // binary correlations
    Eigen::MatrixXd raw;       // pairwise omegas before repair
    Eigen::MatrixXd omega;     // repaired
    RepairLog repair;
    double max_abs_residual = 0.0;
    std::size_t clamped_pairs = 0;
    std::size_t degenerate_pairs = 0; // constant series; omega set to 0
};

/// Calibrates every pair; `jobs` threads.
OccurrenceCalibration calibrate_occurrence_correlation(const glm::Occurrence& occ, const Calendar& calendar,
                                                       const glm::GlmOccurrenceModel& model,
                                                       double tolerance = 1e-6, int max_iterations = 200,
                                                       unsigned jobs = 1);

/// Sorted wet-day amounts per (site, month) with linear-interpolation
/// inverse CDF and its piecewise-linear inverse.
class MonthlyEmpiricalAmounts {
public:
    MonthlyEmpiricalAmounts() = default;
    MonthlyEmpiricalAmounts(std::size_t sites, std::vector<std::vector<float>> samples,
                            std::vector<std::vector<int>> source_months);

    [[nodiscard]] std::size_t site_count() const noexcept { return sites_; }
    [[nodiscard]] std::span<const float> sample(std::size_t site, int month) const;
    /// Months pooled into the cell (just the cell's month unless it was empty).
    [[nodiscard]] std::span<const int> source_months(std::size_t site, int month) const;
    [[nodiscard]] double inverse_cdf(std::size_t site, int month, double u) const;
    [[nodiscard]] double cdf(std::size_t site, int month, double x) const;

    friend bool operator==(const MonthlyEmpiricalAmounts&, const MonthlyEmpiricalAmounts&) = default;

private:
    std::size_t sites_ = 0;
    std::vector<std::vector<float>> samples_; // [site * 12 + month - 1]
    std::vector<std::vector<int>> source_months_;
};

/// Cells without wet days pool the nearest months on both sides, widening
/// until a wet day appears. Throws DataError for a site that is never wet.
MonthlyEmpiricalAmounts fit_amount_marginals(const ObservationSet& obs, double wet_threshold);

/// Spearman correlation of amounts over days when both sites are wet; 0 with
/// fewer than 3 such days or a constant rank series.
Eigen::MatrixXd wet_amount_spearman(const ObservationSet& obs, double wet_threshold);

/// Gaussian correlation from a Spearman correlation, 2 sin(pi rho / 6).
double spearman_to_gaussian(double rho_s) noexcept;

struct AmountModel {
    MonthlyEmpiricalAmounts marginals;
    Eigen::MatrixXd spearman;
    Eigen::MatrixXd raw;
    Eigen::MatrixXd omega;
    RepairLog repair;
};

AmountModel fit_amounts(const ObservationSet& obs, double wet_threshold);

/// F with F F^T equal to a correlation matrix, from its eigen decomposition.
Eigen::MatrixXd correlation_factor(const Eigen::MatrixXd& omega);

/// Correlated standard normals, one column per day, in blocks of days drawn
/// in column order from `rng`.
class CorrelatedNormals {
public:
    CorrelatedNormals(const Eigen::MatrixXd& factor, std::uint64_t seed, std::size_t block_days = 512);
    /// Normals of day t; days must be requested in increasing order.
    [[nodiscard]] Eigen::Ref<const Eigen::VectorXd> day(std::size_t t);

private:
    const Eigen::MatrixXd& factor_;
    Rng rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::size_t block_days_;
    std::size_t block_start_ = 0;
    bool filled_ = false;
    Eigen::MatrixXd z_;
    Eigen::MatrixXd w_;
};

/// Per day: correlated normals w from `factor`; site i is wet iff
/// Phi(w_i) <= p_i(t), p01 or p11 by site i's previous simulated state and the
/// month of day t.
glm::Occurrence simulate_occurrence(const glm::GlmOccurrenceModel& model, const Eigen::MatrixXd& factor,
                                    const Calendar& calendar, std::span<const std::uint8_t> initial_wet,
                                    std::uint64_t seed);

/// Wet sites get inverseCDF_{site, month}(Phi(v_site)) with v correlated by
/// `factor`; dry sites 0.
PrecipMatrix simulate_amounts(const glm::Occurrence& occ, const Calendar& calendar,
                              const MonthlyEmpiricalAmounts& amounts, const Eigen::MatrixXd& factor,
                              std::uint64_t seed);

struct WilksConfig {
    double wet_threshold = 0.3;
    double pseudo = 0.5;
    double calibration_tolerance = 1e-6;
    int max_iterations = 200;

    void validate() const;
};

struct WilksModel {
    WilksConfig config;
    GridSpec grid;
    Calendar calendar; // training calendar
    glm::GlmOccurrenceModel occurrence;
    OccurrenceCalibration occurrence_correlation;
    AmountModel amounts;
    std::vector<std::uint8_t> initial_wet; // first training day
    Eigen::MatrixXd occurrence_factor;
    Eigen::MatrixXd amount_factor;
};

WilksModel fit(const ObservationSet& obs, const WilksConfig& config, unsigned jobs = 1);

/// Recomputes the sampling factors from the repaired matrices.
void refresh_factors(WilksModel& model);

Realization simulate_realization(const WilksModel& model, const Calendar& calendar, int sim_id, std::uint64_t seed);

/// Seeds derive_seed(master_seed, r), sim ids 1..n_sims; output independent of jobs.
SimulationSet simulate(const WilksModel& model, const Calendar& calendar, std::size_t n_sims,
                       std::uint64_t master_seed, unsigned jobs = 1);

inline constexpr const char* kGeneratorName = "wilks";

nlohmann::json to_json(const WilksConfig& c);
WilksConfig config_from_json(const nlohmann::json& j);
nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RepairLog& log);
RepairLog repair_log_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MonthlyEmpiricalAmounts& a);
MonthlyEmpiricalAmounts amounts_from_json(const nlohmann::json& j);

} // namespace precipgen::wilks
