#include "precipgen/arima.hpp"

#include "precipgen/error.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/NonLinearOptimization>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace precipgen::arima {

namespace {

std::vector<double> difference(std::span<const double> x, int d) {
    std::vector<double> w(x.begin(), x.end());
    for (int k = 0; k < d && !w.empty(); ++k) {
        for (std::size_t t = w.size() - 1; t > 0; --t) {
            w[t] -= w[t - 1];
        }
        w.erase(w.begin());
    }
    return w;
}

/// Residuals of the ARMA recursion with pre-sample residuals set to zero;
/// entries t < p are zero and excluded from the objective.
std::vector<double> arma_residuals(std::span<const double> x, std::span<const double> ar,
                                   std::span<const double> ma) {
    const std::size_t p = ar.size();
    std::vector<double> e(x.size(), 0.0);
    for (std::size_t t = p; t < x.size(); ++t) {
        double pred = 0.0;
        for (std::size_t i = 0; i < p; ++i) {
            pred += ar[i] * x[t - 1 - i];
        }
        for (std::size_t j = 0; j < ma.size() && j < t; ++j) {
            pred += ma[j] * e[t - 1 - j];
        }
        e[t] = x[t] - pred;
    }
    return e;
}

Eigen::VectorXd least_squares(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
    // Minimum-norm solution: collinear regressors (e.g. a constant series)
    // produce zero coefficients rather than arbitrary ones.
    return a.completeOrthogonalDecomposition().solve(b);
}

Eigen::VectorXd fit_ar_ols(std::span<const double> x, int p) {
    const std::size_t n = x.size();
    const std::size_t rows = n - static_cast<std::size_t>(p);
    Eigen::MatrixXd a(rows, p);
    Eigen::VectorXd b(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t t = r + static_cast<std::size_t>(p);
        b(r) = x[t];
        for (int i = 0; i < p; ++i) {
            a(r, i) = x[t - 1 - i];
        }
    }
    return least_squares(a, b);
}

struct ArmaObjective {
    using Scalar = double;
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

    std::span<const double> x;
    int p = 0;
    int q = 0;

    [[nodiscard]] int inputs() const { return p + q; }
    [[nodiscard]] int values() const { return static_cast<int>(x.size()) - p; }

    int operator()(const Eigen::VectorXd& params, Eigen::VectorXd& fvec) const {
        std::vector<double> ar(params.data(), params.data() + p);
        std::vector<double> ma(params.data() + p, params.data() + p + q);
        const auto e = arma_residuals(x, ar, ma);
        for (int t = 0; t < values(); ++t) {
            fvec(t) = e[static_cast<std::size_t>(t + p)];
        }
        return 0;
    }
};

/// Hannan-Rissanen: long AR for innovations, then regression on lags of the
/// series and of those innovations.
Eigen::VectorXd hannan_rissanen(std::span<const double> x, int p, int q) {
    const int n = static_cast<int>(x.size());
    const int m = std::clamp(std::max(p + q, static_cast<int>(std::lround(std::sqrt(n)))), 1, std::max(1, n / 3));
    const Eigen::VectorXd long_ar = fit_ar_ols(x, m);
    std::vector<double> innov(x.size(), 0.0);
    for (int t = m; t < n; ++t) {
        double pred = 0.0;
        for (int i = 0; i < m; ++i) {
            pred += long_ar(i) * x[t - 1 - i];
        }
        innov[t] = x[t] - pred;
    }
    const int start = m + std::max(p, q);
    if (start >= n - 1) {
        return Eigen::VectorXd::Zero(p + q);
    }
    Eigen::MatrixXd a(n - start, p + q);
    Eigen::VectorXd b(n - start);
    for (int t = start; t < n; ++t) {
        b(t - start) = x[t];
        for (int i = 0; i < p; ++i) {
            a(t - start, i) = x[t - 1 - i];
        }
        for (int j = 0; j < q; ++j) {
            a(t - start, p + j) = innov[t - 1 - j];
        }
    }
    return least_squares(a, b);
}

} // namespace

std::size_t minimum_length(const ArimaOrder& order) {
    return static_cast<std::size_t>(std::max(8, 3 * (order.p + order.d + order.q + 1)));
}

bool roots_outside_unit_circle(std::span<const double> c) {
    std::size_t k = c.size();
    while (k > 0 && c[k - 1] == 0.0) {
        --k;
    }
    if (k == 0) {
        return true;
    }
    // Roots of 1 - c1 z - ... - ck z^k are reciprocals of the eigenvalues of
    // the companion matrix of z^k - c1 z^(k-1) - ... - ck.
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < k; ++i) {
        companion(0, static_cast<Eigen::Index>(i)) = c[i];
    }
    for (std::size_t i = 1; i < k; ++i) {
        companion(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i - 1)) = 1.0;
    }
    const Eigen::VectorXcd eig = companion.eigenvalues();
    for (Eigen::Index i = 0; i < eig.size(); ++i) {
        if (std::abs(eig(i)) >= 1.0 - 1e-9) {
            return false;
        }
    }
    return true;
}

ArimaModel fit(std::span<const double> series, const ArimaOrder& order) {
    if (order.p < 0 || order.d < 0 || order.q < 0 || order.p > 10 || order.d > 2 || order.q > 10) {
        throw ConfigError("ARIMA order must satisfy 0 <= p, q <= 10 and 0 <= d <= 2");
    }
    if (series.size() < minimum_length(order)) {
        throw DataError("ARIMA(" + std::to_string(order.p) + "," + std::to_string(order.d) + "," +
                        std::to_string(order.q) + ") needs at least " + std::to_string(minimum_length(order)) +
                        " annual values, got " + std::to_string(series.size()));
    }
    for (double v : series) {
        if (!std::isfinite(v)) {
            throw DataError("ARIMA series contains a non-finite value");
        }
    }

    ArimaModel model;
    model.order = order;
    model.n_observations = series.size();

    std::vector<double> x = difference(series, order.d);
    if (order.d == 0) {
        model.mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
        for (double& v : x) {
            v -= model.mean;
        }
    }

    Eigen::VectorXd params = Eigen::VectorXd::Zero(order.p + order.q);
    if (order.q == 0) {
        if (order.p > 0) {
            params = fit_ar_ols(x, order.p);
        }
    } else {
        params = hannan_rissanen(x, order.p, order.q);
        ArmaObjective objective{x, order.p, order.q};
        Eigen::NumericalDiff<ArmaObjective> numeric(objective);
        Eigen::LevenbergMarquardt<Eigen::NumericalDiff<ArmaObjective>> lm(numeric);
        lm.parameters.maxfev = 2000;
        lm.parameters.xtol = 1e-12;
        lm.parameters.ftol = 1e-12;
        lm.minimize(params);
    }

    model.ar.assign(params.data(), params.data() + order.p);
    model.ma.assign(params.data() + order.p, params.data() + order.p + order.q);

    if (!roots_outside_unit_circle(model.ar)) {
        throw DataError("ARIMA fit is not causal (AR root on or inside the unit circle); lower the order");
    }
    std::vector<double> neg_ma(model.ma.size());
    std::transform(model.ma.begin(), model.ma.end(), neg_ma.begin(), [](double v) { return -v; });
    if (!roots_outside_unit_circle(neg_ma)) {
        throw DataError("ARIMA fit is not invertible (MA root on or inside the unit circle); lower the order");
    }

    const auto e = arma_residuals(x, model.ar, model.ma);
    const auto used = std::span<const double>(e).subspan(static_cast<std::size_t>(order.p));
    const double n_used = static_cast<double>(used.size());
    double sse = 0.0;
    double sum = 0.0;
    for (double v : used) {
        sse += v * v;
        sum += v;
    }
    model.residual_mean = sum / n_used;
    model.residual_variance = sse / n_used - model.residual_mean * model.residual_mean;
    model.innovation_variance = sse / n_used;
    // A perfectly predictable series still needs a positive innovation scale.
    const double floor = 1e-12 * std::max(1.0, model.mean * model.mean);
    model.innovation_variance = std::max(model.innovation_variance, floor);
    return model;
}

AnnualTotals annual_totals(const ObservationSet& obs) {
    AnnualTotals out;
    const auto& cal = obs.calendar();
    if (cal.day_count() == 0) {
        return out;
    }
    const auto means = regional_mean_series(obs.values());
    for (int y = cal.first_year(); y <= cal.last_year(); ++y) {
        if (!cal.covers_full_year(y)) {
            continue;
        }
        const auto [first, last] = cal.year_range(y);
        double total = 0.0;
        for (std::size_t t = first; t < last; ++t) {
            total += means[t];
        }
        out.years.push_back(y);
        out.totals.push_back(total);
    }
    return out;
}

ArimaModel fit_annual_trend(const ObservationSet& obs, const ArimaOrder& order) {
    const auto totals = annual_totals(obs);
    return fit(totals.totals, order);
}

double project_annual_total(const ArimaModel& model, std::span<const double> history) {
    const auto p = static_cast<std::size_t>(model.order.p);
    const auto d = static_cast<std::size_t>(model.order.d);
    if (history.size() < p + d || (d > 0 && history.empty())) {
        throw DataError("ARIMA projection needs at least p + d = " + std::to_string(p + d) + " past values");
    }
    std::vector<double> x = d > 0 ? difference(history, model.order.d) : std::vector<double>(history.begin(), history.end());
    for (double& v : x) {
        v -= model.mean;
    }
    double next = model.mean;
    if (!x.empty()) {
        const auto e = arma_residuals(x, model.ar, model.ma);
        const std::size_t n = x.size();
        double pred = 0.0;
        for (std::size_t i = 0; i < p && i < n; ++i) {
            pred += model.ar[i] * x[n - 1 - i];
        }
        for (std::size_t j = 0; j < model.ma.size() && j < n; ++j) {
            pred += model.ma[j] * e[n - 1 - j];
        }
        next += pred;
    }
    // Undo differencing: y_n = w_n - sum_{k=1..d} (-1)^k C(d,k) y_{n-k}.
    if (d > 0) {
        const std::size_t n = history.size();
        double binom = 1.0;
        for (std::size_t k = 1; k <= d; ++k) {
            binom = binom * static_cast<double>(d - k + 1) / static_cast<double>(k);
            const double sign = (k % 2 == 1) ? 1.0 : -1.0;
            next += sign * binom * history[n - k];
        }
    }
    return next;
}

nlohmann::json to_json(const ArimaModel& model) {
    return {{"order", {model.order.p, model.order.d, model.order.q}},
            {"ar", model.ar},
            {"ma", model.ma},
            {"mean", model.mean},
            {"innovation_variance", model.innovation_variance},
            {"residual_mean", model.residual_mean},
            {"residual_variance", model.residual_variance},
            {"n_observations", model.n_observations}};
}

ArimaModel model_from_json(const nlohmann::json& j) {
    try {
        ArimaModel m;
        const auto& o = j.at("order");
        m.order = {o.at(0).get<int>(), o.at(1).get<int>(), o.at(2).get<int>()};
        m.ar = j.at("ar").get<std::vector<double>>();
        m.ma = j.at("ma").get<std::vector<double>>();
        m.mean = j.at("mean").get<double>();
        m.innovation_variance = j.at("innovation_variance").get<double>();
        m.residual_mean = j.value("residual_mean", 0.0);
        m.residual_variance = j.value("residual_variance", 0.0);
        m.n_observations = j.value("n_observations", std::size_t{0});
        if (m.ar.size() != static_cast<std::size_t>(m.order.p) || m.ma.size() != static_cast<std::size_t>(m.order.q)) {
            throw DataError("ARIMA coefficient counts do not match the order");
        }
        if (!(m.innovation_variance > 0.0)) {
            throw DataError("ARIMA innovation variance must be positive");
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("invalid ARIMA model: ") + e.what());
    }
}

} // namespace precipgen::arima
