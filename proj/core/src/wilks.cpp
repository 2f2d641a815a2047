#include "precipgen/wilks.hpp"

#include "precipgen/error.hpp"
#include "precipgen/parallel.hpp"
#include "precipgen/stats.hpp"

#include <Eigen/Eigenvalues>

#include <boost/math/tools/toms748_solve.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace precipgen::wilks {

RepairLog repair_psd(Eigen::MatrixXd& m) {
    RepairLog log;
    const Eigen::Index n = m.rows();
    if (n == 0) {
        return log;
    }
    m = 0.5 * (m + m.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    Eigen::VectorXd lambda = es.eigenvalues();
    log.min_eigenvalue = lambda.minCoeff();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (lambda(i) < 0.0) {
            log.max_clip = std::max(log.max_clip, -lambda(i));
            lambda(i) = 0.0;
        }
    }
    log.clipped = log.max_clip > 1e-10;
    if (log.max_clip > 0.0) {
        m = es.eigenvectors() * lambda.asDiagonal() * es.eigenvectors().transpose();
    }
    Eigen::VectorXd d = m.diagonal().cwiseMax(std::numeric_limits<double>::min()).cwiseSqrt().cwiseInverse();
    m = d.asDiagonal() * m * d.asDiagonal();
    m = 0.5 * (m + m.transpose()).eval();
    m = m.cwiseMax(-1.0).cwiseMin(1.0);
    m.diagonal().setOnes();
    return log;
}

bool is_correlation_matrix(const Eigen::MatrixXd& m, double tol) {
    if (m.rows() != m.cols()) {
        return false;
    }
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        if (std::abs(m(i, i) - 1.0) > tol) {
            return false;
        }
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (!(std::abs(m(i, j)) <= 1.0 + tol) || std::abs(m(i, j) - m(j, i)) > tol) {
                return false;
            }
        }
    }
    if (m.rows() == 0) {
        return true;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() >= -tol;
}

namespace {

/// P(W_i <= z_i, W_j <= z_j) for the wet probabilities of a configuration.
double joint_wet(double p_i, double p_j, double z_i, double z_j, double omega) {
    if (p_i <= 0.0 || p_j <= 0.0) {
        return 0.0;
    }
    if (p_i >= 1.0) {
        return p_j;
    }
    if (p_j >= 1.0) {
        return p_i;
    }
    return stats::bivariate_normal_cdf(z_i, z_j, omega);
}

struct PreparedConfig {
    double weight;
    double p_i;
    double p_j;
    double z_i;
    double z_j;
};

std::vector<PreparedConfig> prepare(std::span<const PairConfiguration> configs) {
    std::vector<PreparedConfig> out;
    double total = 0.0;
    for (const auto& c : configs) {
        total += c.weight;
    }
    if (!(total > 0.0)) {
        throw DataError("pair configurations carry no weight");
    }
    for (const auto& c : configs) {
        if (c.weight > 0.0) {
            out.push_back({c.weight / total, c.p_i, c.p_j, stats::normal_quantile(c.p_i),
                           stats::normal_quantile(c.p_j)});
        }
    }
    return out;
}

double predicted(const std::vector<PreparedConfig>& configs, double omega) {
    double pi = 0.0, pj = 0.0, pij = 0.0;
    for (const auto& c : configs) {
        pi += c.weight * c.p_i;
        pj += c.weight * c.p_j;
        pij += c.weight * joint_wet(c.p_i, c.p_j, c.z_i, c.z_j, omega);
    }
    const double var = pi * (1 - pi) * pj * (1 - pj);
    if (!(var > 0.0)) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    return (pij - pi * pj) / std::sqrt(var);
}

} // namespace

double predicted_binary_correlation(std::span<const PairConfiguration> configs, double omega) {
    return predicted(prepare(configs), omega);
}

CalibrationResult calibrate_pair(std::span<const PairConfiguration> configs, double target, double tolerance,
                                 int max_iterations) {
    CalibrationResult r;
    if (!std::isfinite(target)) {
        return r;
    }
    const auto prepared = prepare(configs);
    double lo = -1.0;
    double hi = 1.0;
    const double f_lo = predicted(prepared, lo) - target;
    const double f_hi = predicted(prepared, hi) - target;
    if (!std::isfinite(f_lo) || !std::isfinite(f_hi)) {
        return r;
    }
    if (f_lo >= 0.0) {
        r = {lo, f_lo, 0, f_lo > tolerance};
        return r;
    }
    if (f_hi <= 0.0) {
        r = {hi, f_hi, 0, -f_hi > tolerance};
        return r;
    }
    auto f = [&](double w) { return predicted(prepared, w) - target; };
    auto iterations = static_cast<std::uintmax_t>(std::max(max_iterations, 1));
    const auto bracket = boost::math::tools::toms748_solve(f, lo, hi, f_lo, f_hi,
                                                           boost::math::tools::eps_tolerance<double>(40), iterations);
    r.iterations = static_cast<int>(iterations);
    double mid = 0.5 * (bracket.first + bracket.second);
    double f_mid = f(mid);
    for (double end : {bracket.first, bracket.second}) {
        const double f_end = f(end);
        if (std::abs(f_end) < std::abs(f_mid)) {
            mid = end;
            f_mid = f_end;
        }
    }
    if (!(std::abs(f_mid) <= tolerance)) {
        throw DataError("occurrence correlation root search did not converge (residual " + std::to_string(f_mid) + ")");
    }
    r.omega = mid;
    r.residual = f_mid;
    return r;
}

CalibrationResult calibrate_pair(double p_i, double p_j, double target, double tolerance, int max_iterations) {
    const PairConfiguration c{1.0, p_i, p_j};
    return calibrate_pair(std::span<const PairConfiguration>(&c, 1), target, tolerance, max_iterations);
}

Eigen::MatrixXd binary_correlation_matrix(const glm::Occurrence& occ) {
    const auto n = static_cast<Eigen::Index>(occ.sites);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(occ.days), n);
    for (std::size_t t = 0; t < occ.days; ++t) {
        for (std::size_t s = 0; s < occ.sites; ++s) {
            x(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(s)) = occ(t, s);
        }
    }
    const Eigen::RowVectorXd mean = x.colwise().mean();
    x.rowwise() -= mean;
    const Eigen::MatrixXd cov = x.transpose() * x;
    Eigen::MatrixXd c(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const double v = cov(i, i) * cov(j, j);
            c(i, j) = v > 0.0 ? cov(i, j) / std::sqrt(v) : std::numeric_limits<double>::quiet_NaN();
        }
    }
    return c;
}

OccurrenceCalibration calibrate_occurrence_correlation(const glm::Occurrence& occ, const Calendar& calendar,
                                                       const glm::GlmOccurrenceModel& model, double tolerance,
                                                       int max_iterations, unsigned jobs) {
    if (occ.sites < 2) {
        throw DataError("occurrence correlation needs at least two sites");
    }
    if (occ.days != calendar.day_count() || occ.sites != model.sites) {
        throw DataError("occurrence, calendar and GLM model disagree in shape");
    }
    const std::size_t n = occ.sites;
    OccurrenceCalibration out;
    out.observed = binary_correlation_matrix(occ);
    out.raw = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));

    // Day codes month * 2 + previous wet, per site.
    std::vector<std::uint8_t> code((occ.days - 1) * n);
    std::vector<std::uint8_t> month(occ.days - 1);
    for (std::size_t t = 1; t < occ.days; ++t) {
        month[t - 1] = static_cast<std::uint8_t>(calendar.month(t) - 1);
        for (std::size_t s = 0; s < n; ++s) {
            code[(t - 1) * n + s] = occ(t - 1, s);
        }
    }

    struct PairResult {
        CalibrationResult result;
        bool degenerate;
    };
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    pairs.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            pairs.emplace_back(i, j);
        }
    }
    std::vector<PairResult> results(pairs.size());
    parallel_for(pairs.size(), jobs, [&](std::size_t k) {
        const auto [i, j] = pairs[k];
        const double target = out.observed(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (!std::isfinite(target)) {
            results[k] = {{}, true};
            return;
        }
        std::array<double, 48> counts{};
        for (std::size_t t = 0; t + 1 < occ.days; ++t) {
            ++counts[month[t] * 4u + code[t * n + i] * 2u + code[t * n + j]];
        }
        std::vector<PairConfiguration> configs;
        for (std::size_t b = 0; b < counts.size(); ++b) {
            if (counts[b] == 0) {
                continue;
            }
            const int m = static_cast<int>(b / 4) + 1;
            const bool prev_i = (b / 2) % 2;
            const bool prev_j = b % 2;
            const auto& ci = model.cell(i, m);
            const auto& cj = model.cell(j, m);
            configs.push_back({counts[b], prev_i ? ci.p11 : ci.p01, prev_j ? cj.p11 : cj.p01});
        }
        try {
            results[k] = {calibrate_pair(configs, target, tolerance, max_iterations), false};
        } catch (const DataError& e) {
            throw DataError("site pair (" + std::to_string(i) + ", " + std::to_string(j) + "): " + e.what());
        }
        if (!std::isfinite(predicted_binary_correlation(configs, 0.0))) {
            results[k].degenerate = true;
        }
    });
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto [i, j] = pairs[k];
        const auto& r = results[k];
        const auto a = static_cast<Eigen::Index>(i);
        const auto b = static_cast<Eigen::Index>(j);
        out.raw(a, b) = out.raw(b, a) = r.result.omega;
        if (r.degenerate) {
            ++out.degenerate_pairs;
            continue;
        }
        out.clamped_pairs += r.result.clamped;
        if (!r.result.clamped) {
            out.max_abs_residual = std::max(out.max_abs_residual, std::abs(r.result.residual));
        }
    }
    out.omega = out.raw;
    out.repair = repair_psd(out.omega);
    return out;
}

MonthlyEmpiricalAmounts::MonthlyEmpiricalAmounts(std::size_t sites, std::vector<std::vector<float>> samples,
                                                 std::vector<std::vector<int>> source_months)
    : sites_(sites), samples_(std::move(samples)), source_months_(std::move(source_months)) {
    if (samples_.size() != sites_ * 12 || source_months_.size() != sites_ * 12) {
        throw DataError("empirical amounts: expected 12 cells per site");
    }
    for (auto& s : samples_) {
        if (s.empty()) {
            throw DataError("empirical amounts: empty cell");
        }
        std::sort(s.begin(), s.end());
    }
}

std::span<const float> MonthlyEmpiricalAmounts::sample(std::size_t site, int month) const {
    return samples_.at(site * 12 + static_cast<std::size_t>(month - 1));
}

std::span<const int> MonthlyEmpiricalAmounts::source_months(std::size_t site, int month) const {
    return source_months_.at(site * 12 + static_cast<std::size_t>(month - 1));
}

double MonthlyEmpiricalAmounts::inverse_cdf(std::size_t site, int month, double u) const {
    return stats::quantile_sorted(sample(site, month), std::clamp(u, 0.0, 1.0));
}

double MonthlyEmpiricalAmounts::cdf(std::size_t site, int month, double x) const {
    const auto s = sample(site, month);
    if (x < s.front()) {
        return 0.0;
    }
    if (x >= s.back()) {
        return 1.0;
    }
    const auto it = std::upper_bound(s.begin(), s.end(), static_cast<float>(x));
    const auto k = static_cast<std::size_t>(it - s.begin()) - 1;
    const double a = s[k];
    const double b = s[k + 1];
    const double frac = b > a ? (x - a) / (b - a) : 0.0;
    return (static_cast<double>(k) + frac) / static_cast<double>(s.size() - 1);
}

MonthlyEmpiricalAmounts fit_amount_marginals(const ObservationSet& obs, double wet_threshold) {
    const std::size_t n = obs.site_count();
    const auto& cal = obs.calendar();
    std::vector<std::vector<float>> raw(n * 12);
    for (std::size_t t = 0; t < obs.day_count(); ++t) {
        const auto m = static_cast<std::size_t>(cal.month(t) - 1);
        const auto day = obs.values().day(t);
        for (std::size_t s = 0; s < n; ++s) {
            if (static_cast<double>(day[s]) >= wet_threshold) {
                raw[s * 12 + m].push_back(day[s]);
            }
        }
    }
    std::vector<std::vector<float>> samples(n * 12);
    std::vector<std::vector<int>> sources(n * 12);
    for (std::size_t s = 0; s < n; ++s) {
        for (int m = 0; m < 12; ++m) {
            auto& cell = samples[s * 12 + static_cast<std::size_t>(m)];
            auto& src = sources[s * 12 + static_cast<std::size_t>(m)];
            for (int radius = 0; radius <= 6 && cell.empty(); ++radius) {
                for (int sign : {-1, 1}) {
                    if (radius == 0 && sign == 1) {
                        continue;
                    }
                    const int mm = ((m + sign * radius) % 12 + 12) % 12;
                    if (std::find(src.begin(), src.end(), mm + 1) != src.end()) {
                        continue;
                    }
                    const auto& pool = raw[s * 12 + static_cast<std::size_t>(mm)];
                    if (!pool.empty()) {
                        cell.insert(cell.end(), pool.begin(), pool.end());
                        src.push_back(mm + 1);
                    }
                }
            }
            if (cell.empty()) {
                const auto ll = obs.grid().site(s);
                throw DataError("site " + std::to_string(s) + " (" + std::to_string(ll.lat) + ", " +
                                std::to_string(ll.lon) + ") has no wet day in any month");
            }
            std::sort(src.begin(), src.end());
        }
    }
    return MonthlyEmpiricalAmounts(n, std::move(samples), std::move(sources));
}

namespace {

/// Average ranks of the subset of `order` (site's wet days sorted by amount)
/// that are flagged in `keep`; written into rank[day].
void subset_ranks(std::span<const std::uint32_t> order, const PrecipMatrix& v, std::size_t site,
                  const std::vector<std::uint8_t>& keep, std::vector<double>& rank) {
    std::size_t r = 0;
    std::size_t k = 0;
    while (k < order.size()) {
        if (!keep[order[k]]) {
            ++k;
            continue;
        }
        const float value = v(order[k], site);
        std::size_t end = k;
        std::size_t count = 0;
        while (end < order.size() && v(order[end], site) == value) {
            count += keep[order[end]];
            ++end;
        }
        const double avg = static_cast<double>(r) + (static_cast<double>(count) + 1.0) / 2.0;
        for (std::size_t q = k; q < end; ++q) {
            if (keep[order[q]]) {
                rank[order[q]] = avg;
            }
        }
        r += count;
        k = end;
    }
}

} // namespace

Eigen::MatrixXd wet_amount_spearman(const ObservationSet& obs, double wet_threshold) {
    const std::size_t n = obs.site_count();
    const std::size_t days = obs.day_count();
    const auto& v = obs.values();
    std::vector<std::vector<std::uint32_t>> order(n);
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t t = 0; t < days; ++t) {
            if (static_cast<double>(v(t, s)) >= wet_threshold) {
                order[s].push_back(static_cast<std::uint32_t>(t));
            }
        }
        std::stable_sort(order[s].begin(), order[s].end(),
                         [&](std::uint32_t a, std::uint32_t b) { return v(a, s) < v(b, s); });
    }
    Eigen::MatrixXd rho = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    std::vector<std::uint8_t> wet_i(days), both(days);
    std::vector<double> rank_i(days), rank_j(days);
    for (std::size_t i = 0; i < n; ++i) {
        std::fill(wet_i.begin(), wet_i.end(), 0);
        for (auto t : order[i]) {
            wet_i[t] = 1;
        }
        for (std::size_t j = i + 1; j < n; ++j) {
            std::fill(both.begin(), both.end(), 0);
            std::size_t common = 0;
            for (auto t : order[j]) {
                if (wet_i[t]) {
                    both[t] = 1;
                    ++common;
                }
            }
            double r = 0.0;
            if (common >= 3) {
                subset_ranks(order[i], v, i, both, rank_i);
                subset_ranks(order[j], v, j, both, rank_j);
                const double mean = (static_cast<double>(common) + 1.0) / 2.0;
                double sxy = 0.0, sxx = 0.0, syy = 0.0;
                for (auto t : order[j]) {
                    if (both[t]) {
                        const double a = rank_i[t] - mean;
                        const double b = rank_j[t] - mean;
                        sxy += a * b;
                        sxx += a * a;
                        syy += b * b;
                    }
                }
                r = sxx > 0.0 && syy > 0.0 ? std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0) : 0.0;
            }
            rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r;
            rho(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = r;
        }
    }
    return rho;
}

double spearman_to_gaussian(double rho_s) noexcept { return 2.0 * std::sin(std::numbers::pi * rho_s / 6.0); }

AmountModel fit_amounts(const ObservationSet& obs, double wet_threshold) {
    AmountModel m;
    m.marginals = fit_amount_marginals(obs, wet_threshold);
    m.spearman = wet_amount_spearman(obs, wet_threshold);
    m.raw = m.spearman.unaryExpr([](double r) { return spearman_to_gaussian(r); });
    m.raw.diagonal().setOnes();
    m.omega = m.raw;
    m.repair = repair_psd(m.omega);
    return m;
}

Eigen::MatrixXd correlation_factor(const Eigen::MatrixXd& omega) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(omega);
    const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal();
}

CorrelatedNormals::CorrelatedNormals(const Eigen::MatrixXd& factor, std::uint64_t seed, std::size_t block_days)
    : factor_(factor), rng_(seed), block_days_(std::max<std::size_t>(block_days, 1)) {}

Eigen::Ref<const Eigen::VectorXd> CorrelatedNormals::day(std::size_t t) {
    if (!filled_ || t >= block_start_ + block_days_) {
        if (filled_ && t < block_start_) {
            throw std::logic_error("CorrelatedNormals: days requested out of order");
        }
        block_start_ = filled_ ? block_start_ + block_days_ : 0;
        while (t >= block_start_ + block_days_) {
            block_start_ += block_days_;
        }
        z_.resize(factor_.cols(), static_cast<Eigen::Index>(block_days_));
        for (Eigen::Index c = 0; c < z_.cols(); ++c) {
            for (Eigen::Index r = 0; r < z_.rows(); ++r) {
                z_(r, c) = normal_(rng_);
            }
        }
        w_.noalias() = factor_ * z_;
        filled_ = true;
    }
    return w_.col(static_cast<Eigen::Index>(t - block_start_));
}

glm::Occurrence simulate_occurrence(const glm::GlmOccurrenceModel& model, const Eigen::MatrixXd& factor,
                                    const Calendar& calendar, std::span<const std::uint8_t> initial_wet,
                                    std::uint64_t seed) {
    const std::size_t n = model.sites;
    if (static_cast<std::size_t>(factor.rows()) != n || initial_wet.size() != n) {
        throw DataError("simulate_occurrence: model, factor and initial state disagree in site count");
    }
    // Normal thresholds z = Phi^-1(p) per [site][month][previous state].
    std::vector<double> z(n * 24);
    for (std::size_t s = 0; s < n; ++s) {
        for (int m = 1; m <= 12; ++m) {
            const auto& c = model.cell(s, m);
            z[s * 24 + static_cast<std::size_t>(m - 1) * 2] = stats::normal_quantile(c.p01);
            z[s * 24 + static_cast<std::size_t>(m - 1) * 2 + 1] = stats::normal_quantile(c.p11);
        }
    }
    glm::Occurrence occ;
    occ.days = calendar.day_count();
    occ.sites = n;
    occ.wet.assign(occ.days * n, 0);
    CorrelatedNormals normals(factor, seed);
    std::vector<std::uint8_t> prev(initial_wet.begin(), initial_wet.end());
    for (std::size_t t = 0; t < occ.days; ++t) {
        const auto w = normals.day(t);
        const auto m = static_cast<std::size_t>(calendar.month(t) - 1);
        for (std::size_t s = 0; s < n; ++s) {
            const bool wet = w(static_cast<Eigen::Index>(s)) <= z[s * 24 + m * 2 + prev[s]];
            occ.wet[t * n + s] = wet;
            prev[s] = wet;
        }
    }
    return occ;
}

PrecipMatrix simulate_amounts(const glm::Occurrence& occ, const Calendar& calendar,
                              const MonthlyEmpiricalAmounts& amounts, const Eigen::MatrixXd& factor,
                              std::uint64_t seed) {
    const std::size_t n = occ.sites;
    if (occ.days != calendar.day_count() || amounts.site_count() != n || static_cast<std::size_t>(factor.rows()) != n) {
        throw DataError("simulate_amounts: occurrence, calendar, amounts and factor disagree in shape");
    }
    PrecipMatrix out(occ.days, n);
    CorrelatedNormals normals(factor, seed);
    for (std::size_t t = 0; t < occ.days; ++t) {
        const auto v = normals.day(t);
        const int m = calendar.month(t);
        for (std::size_t s = 0; s < n; ++s) {
            if (occ(t, s)) {
                out(t, s) = static_cast<float>(
                    amounts.inverse_cdf(s, m, stats::normal_cdf(v(static_cast<Eigen::Index>(s)))));
            }
        }
    }
    return out;
}

void WilksConfig::validate() const {
    if (!(wet_threshold > 0.0) || !std::isfinite(wet_threshold)) {
        throw ConfigError("wet_threshold must be positive");
    }
    if (!(pseudo >= 0.0) || !std::isfinite(pseudo)) {
        throw ConfigError("pseudo-count must be >= 0");
    }
    if (!(calibration_tolerance > 0.0 && calibration_tolerance < 1.0)) {
        throw ConfigError("calibration_tolerance must lie in (0, 1)");
    }
    if (max_iterations < 1) {
        throw ConfigError("max_iterations must be >= 1");
    }
}

WilksModel fit(const ObservationSet& obs, const WilksConfig& config, unsigned jobs) {
    config.validate();
    const auto& cal = obs.calendar();
    bool full_year = false;
    for (int y = cal.first_year(); y <= cal.last_year() && cal.day_count() > 0; ++y) {
        full_year = full_year || cal.covers_full_year(y);
    }
    if (!full_year) {
        throw DataError("Wilks model needs observations spanning at least one full calendar year");
    }
    WilksModel model;
    model.config = config;
    model.grid = obs.grid();
    model.calendar = cal;
    const auto occ = glm::occurrence(obs.values(), config.wet_threshold);
    model.occurrence = glm::fit_glm_occurrence(occ, cal, config.wet_threshold, config.pseudo);
    if (obs.site_count() >= 2) {
        model.occurrence_correlation = calibrate_occurrence_correlation(
            occ, cal, model.occurrence, config.calibration_tolerance, config.max_iterations, jobs);
    } else {
        auto& oc = model.occurrence_correlation;
        oc.observed = oc.raw = oc.omega = Eigen::MatrixXd::Identity(1, 1);
    }
    model.amounts = fit_amounts(obs, config.wet_threshold);
    model.initial_wet.assign(occ.wet.begin(), occ.wet.begin() + static_cast<std::ptrdiff_t>(occ.sites));
    refresh_factors(model);
    return model;
}

void refresh_factors(WilksModel& model) {
    model.occurrence_factor = correlation_factor(model.occurrence_correlation.omega);
    model.amount_factor = correlation_factor(model.amounts.omega);
}

Realization simulate_realization(const WilksModel& model, const Calendar& calendar, int sim_id, std::uint64_t seed) {
    const auto occ = simulate_occurrence(model.occurrence, model.occurrence_factor, calendar, model.initial_wet,
                                         derive_seed(seed, 0));
    Realization r;
    r.info = {sim_id, seed, kGeneratorName};
    r.values = simulate_amounts(occ, calendar, model.amounts.marginals, model.amount_factor, derive_seed(seed, 1));
    return r;
}

SimulationSet simulate(const WilksModel& model, const Calendar& calendar, std::size_t n_sims,
                       std::uint64_t master_seed, unsigned jobs) {
    if (n_sims == 0) {
        throw ConfigError("number of simulations must be >= 1");
    }
    std::vector<Realization> reals(n_sims);
    parallel_for(n_sims, jobs, [&](std::size_t r) {
        reals[r] = simulate_realization(model, calendar, static_cast<int>(r + 1), derive_seed(master_seed, r));
    });
    SimulationSet set(model.grid, calendar, kGeneratorName, master_seed, true);
    for (auto& r : reals) {
        set.add(std::move(r));
    }
    return set;
}

nlohmann::json to_json(const WilksConfig& c) {
    return {{"wet_threshold", c.wet_threshold},
            {"pseudo", c.pseudo},
            {"calibration_tolerance", c.calibration_tolerance},
            {"max_iterations", c.max_iterations}};
}

WilksConfig config_from_json(const nlohmann::json& j) {
    WilksConfig c;
    try {
        c.wet_threshold = j.value("wet_threshold", c.wet_threshold);
        c.pseudo = j.value("pseudo", c.pseudo);
        c.calibration_tolerance = j.value("calibration_tolerance", c.calibration_tolerance);
        c.max_iterations = j.value("max_iterations", c.max_iterations);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid wilks configuration: ") + e.what());
    }
    c.validate();
    return c;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    auto rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        auto row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            row.push_back(std::isfinite(m(i, j)) ? nlohmann::json(m(i, j)) : nlohmann::json(nullptr));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    try {
        const auto n = static_cast<Eigen::Index>(j.size());
        const auto cols = n > 0 ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
        Eigen::MatrixXd m(n, cols);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& row = j.at(static_cast<std::size_t>(i));
            if (static_cast<Eigen::Index>(row.size()) != cols) {
                throw DataError("matrix rows differ in length");
            }
            for (Eigen::Index k = 0; k < cols; ++k) {
                const auto& e = row.at(static_cast<std::size_t>(k));
                m(i, k) = e.is_null() ? std::numeric_limits<double>::quiet_NaN() : e.get<double>();
            }
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed matrix: ") + e.what());
    }
}

nlohmann::json to_json(const RepairLog& log) {
    return {{"clipped", log.clipped}, {"max_clip", log.max_clip}, {"min_eigenvalue", log.min_eigenvalue}};
}

RepairLog repair_log_from_json(const nlohmann::json& j) {
    try {
        return {j.at("clipped").get<bool>(), j.at("max_clip").get<double>(), j.at("min_eigenvalue").get<double>()};
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed repair log: ") + e.what());
    }
}

nlohmann::json to_json(const MonthlyEmpiricalAmounts& a) {
    auto cells = nlohmann::json::array();
    for (std::size_t s = 0; s < a.site_count(); ++s) {
        for (int m = 1; m <= 12; ++m) {
            const auto sample = a.sample(s, m);
            const auto src = a.source_months(s, m);
            cells.push_back({{"site", s},
                             {"month", m},
                             {"source_months", std::vector<int>(src.begin(), src.end())},
                             {"amounts", std::vector<float>(sample.begin(), sample.end())}});
        }
    }
    return {{"sites", a.site_count()}, {"cells", cells}};
}

MonthlyEmpiricalAmounts amounts_from_json(const nlohmann::json& j) {
    try {
        const auto n = j.at("sites").get<std::size_t>();
        std::vector<std::vector<float>> samples(n * 12);
        std::vector<std::vector<int>> sources(n * 12);
        for (const auto& c : j.at("cells")) {
            const auto s = c.at("site").get<std::size_t>();
            const int m = c.at("month").get<int>();
            if (s >= n || m < 1 || m > 12) {
                throw DataError("empirical amounts: cell index out of range");
            }
            samples[s * 12 + static_cast<std::size_t>(m - 1)] = c.at("amounts").get<std::vector<float>>();
            sources[s * 12 + static_cast<std::size_t>(m - 1)] = c.at("source_months").get<std::vector<int>>();
        }
        return MonthlyEmpiricalAmounts(n, std::move(samples), std::move(sources));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed empirical amounts: ") + e.what());
    }
}

} // namespace precipgen::wilks
