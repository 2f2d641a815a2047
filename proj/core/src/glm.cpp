#include "precipgen/glm.hpp"

#include "precipgen/error.hpp"

#include <cmath>

namespace precipgen::glm {

double logistic(double x) noexcept {
    if (x >= 0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double logit(double p) noexcept { return std::log(p) - std::log1p(-p); }

TransitionProbabilities closed_form(const TransitionCounts& c, double pseudo) {
    TransitionProbabilities p;
    const double d0 = c.from_dry() + 2 * pseudo;
    const double d1 = c.from_wet() + 2 * pseudo;
    p.p01 = d0 > 0 ? (c.dry_wet + pseudo) / d0 : std::nan("");
    p.p11 = d1 > 0 ? (c.wet_wet + pseudo) / d1 : std::nan("");
    return p;
}

namespace {

struct Group {
    double wet;   // weight of y = 1
    double total; // weight of y = 0 and y = 1
};

double log_likelihood(const Group g[2], double b0, double b1) {
    double ll = 0.0;
    for (int x = 0; x < 2; ++x) {
        const double eta = b0 + b1 * x;
        // log p = -log(1 + e^-eta), log (1 - p) = -log(1 + e^eta)
        const double log_p = -std::log1p(std::exp(-std::abs(eta))) - std::max(-eta, 0.0);
        const double log_q = -std::log1p(std::exp(-std::abs(eta))) - std::max(eta, 0.0);
        ll += g[x].wet * log_p + (g[x].total - g[x].wet) * log_q;
    }
    return ll;
}

} // namespace

LogitFit fit_logistic(const TransitionCounts& c, double pseudo, int max_iterations, double tolerance) {
    const Group g[2] = {{c.dry_wet + pseudo, c.from_dry() + 2 * pseudo}, {c.wet_wet + pseudo, c.from_wet() + 2 * pseudo}};
    for (const auto& grp : g) {
        if (!(grp.wet > 0.0 && grp.total - grp.wet > 0.0)) {
            throw DataError("logistic fit needs both outcomes in each group (separation)");
        }
    }
    LogitFit fit;
    double b0 = 0.0;
    double b1 = 0.0;
    double ll = log_likelihood(g, b0, b1);
    for (int it = 1; it <= max_iterations; ++it) {
        double grad0 = 0.0, grad1 = 0.0, h00 = 0.0, h01 = 0.0, h11 = 0.0;
        for (int x = 0; x < 2; ++x) {
            const double p = logistic(b0 + b1 * x);
            const double r = g[x].wet - g[x].total * p;
            const double w = g[x].total * p * (1 - p);
            grad0 += r;
            grad1 += r * x;
            h00 += w;
            h01 += w * x;
            h11 += w * x * x;
        }
        const double det = h00 * h11 - h01 * h01;
        if (!(det > 0.0)) {
            break;
        }
        double step0 = (h11 * grad0 - h01 * grad1) / det;
        double step1 = (h00 * grad1 - h01 * grad0) / det;
        double scale = 1.0;
        double next_ll = log_likelihood(g, b0 + step0, b1 + step1);
        while (next_ll < ll && scale > 1e-8) {
            scale *= 0.5;
            next_ll = log_likelihood(g, b0 + scale * step0, b1 + scale * step1);
        }
        b0 += scale * step0;
        b1 += scale * step1;
        ll = next_ll;
        fit.iterations = it;
        if (std::abs(scale * step0) + std::abs(scale * step1) < tolerance * (1.0 + std::abs(b0) + std::abs(b1))) {
            fit.converged = true;
            break;
        }
    }
    fit.beta0 = b0;
    fit.beta1 = b1;
    return fit;
}

double CellFit::stationary_wet() const noexcept {
    const double denom = 1.0 + p01 - p11;
    return denom > 0.0 ? p01 / denom : p11;
}

Occurrence occurrence(const PrecipMatrix& values, double wet_threshold) {
    Occurrence occ;
    occ.days = values.days();
    occ.sites = values.sites();
    occ.wet.resize(occ.days * occ.sites);
    const auto v = values.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
        occ.wet[i] = static_cast<double>(v[i]) >= wet_threshold ? 1 : 0;
    }
    return occ;
}

GlmOccurrenceModel fit_glm_occurrence(const ObservationSet& obs, double wet_threshold, double pseudo) {
    return fit_glm_occurrence(occurrence(obs.values(), wet_threshold), obs.calendar(), wet_threshold, pseudo);
}

GlmOccurrenceModel fit_glm_occurrence(const Occurrence& occ, const Calendar& calendar, double wet_threshold,
                                      double pseudo) {
    if (!(wet_threshold > 0.0)) {
        throw ConfigError("wet_threshold must be positive");
    }
    if (!(pseudo >= 0.0) || !std::isfinite(pseudo)) {
        throw ConfigError("GLM pseudo-count must be >= 0");
    }
    if (occ.days != calendar.day_count()) {
        throw DataError("occurrence and calendar lengths differ");
    }
    if (occ.days < 2) {
        throw DataError("occurrence model needs at least two days");
    }
    GlmOccurrenceModel model;
    model.sites = occ.sites;
    model.wet_threshold = wet_threshold;
    model.pseudo = pseudo;
    model.cells.resize(occ.sites * 12);

    std::vector<double> wet_days(occ.sites * 12, 0.0);
    std::vector<double> month_days(12, 0.0);
    std::vector<double> site_wet(occ.sites, 0.0);
    for (std::size_t t = 0; t < occ.days; ++t) {
        const int m = calendar.month(t) - 1;
        month_days[static_cast<std::size_t>(m)] += 1;
        for (std::size_t s = 0; s < occ.sites; ++s) {
            const bool w = occ(t, s);
            wet_days[s * 12 + static_cast<std::size_t>(m)] += w;
            site_wet[s] += w;
            if (t == 0) {
                continue;
            }
            auto& c = model.cells[s * 12 + static_cast<std::size_t>(m)].counts;
            const bool prev = occ(t - 1, s);
            if (prev) {
                (w ? c.wet_wet : c.wet_dry) += 1;
            } else {
                (w ? c.dry_wet : c.dry_dry) += 1;
            }
        }
    }

    for (std::size_t s = 0; s < occ.sites; ++s) {
        for (int m = 0; m < 12; ++m) {
            auto& cell = model.cells[s * 12 + static_cast<std::size_t>(m)];
            const auto& c = cell.counts;
            const double clim = month_days[static_cast<std::size_t>(m)] > 0
                                    ? wet_days[s * 12 + static_cast<std::size_t>(m)] / month_days[static_cast<std::size_t>(m)]
                                    : site_wet[s] / static_cast<double>(occ.days);
            const auto cf = closed_form(c, pseudo);
            const bool dry_ok = c.from_dry() > 0;
            const bool wet_ok = c.from_wet() > 0;
            cell.p01 = dry_ok ? cf.p01 : clim;
            cell.p11 = wet_ok ? cf.p11 : clim;
            const bool interior = cell.p01 > 0 && cell.p01 < 1 && cell.p11 > 0 && cell.p11 < 1;
            if (!dry_ok || !wet_ok) {
                cell.method = 2;
            } else if (interior) {
                const auto fit = fit_logistic(c, pseudo);
                if (fit.converged) {
                    cell.beta0 = fit.beta0;
                    cell.beta1 = fit.beta1;
                    cell.p01 = logistic(fit.beta0);
                    cell.p11 = logistic(fit.beta0 + fit.beta1);
                    cell.method = 0;
                    continue;
                }
                cell.method = 1;
            } else {
                cell.method = 1;
            }
            cell.beta0 = logit(cell.p01);
            cell.beta1 = logit(cell.p11) - cell.beta0;
        }
    }
    return model;
}

namespace {

nlohmann::json finite_or_null(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

double number_or_inf(const nlohmann::json& j, double fallback) {
    return j.is_null() ? fallback : j.get<double>();
}

} // namespace

nlohmann::json to_json(const GlmOccurrenceModel& model) {
    auto cells = nlohmann::json::array();
    for (std::size_t s = 0; s < model.sites; ++s) {
        for (int m = 1; m <= 12; ++m) {
            const auto& c = model.cell(s, m);
            cells.push_back({{"site", s},
                             {"month", m},
                             {"p01", c.p01},
                             {"p11", c.p11},
                             {"beta0", finite_or_null(c.beta0)},
                             {"beta1", finite_or_null(c.beta1)},
                             {"method", c.method},
                             {"counts", {c.counts.dry_dry, c.counts.dry_wet, c.counts.wet_dry, c.counts.wet_wet}}});
        }
    }
    return {{"sites", model.sites}, {"wet_threshold", model.wet_threshold}, {"pseudo", model.pseudo}, {"cells", cells}};
}

GlmOccurrenceModel glm_from_json(const nlohmann::json& j) {
    GlmOccurrenceModel model;
    try {
        model.sites = j.at("sites").get<std::size_t>();
        model.wet_threshold = j.at("wet_threshold").get<double>();
        model.pseudo = j.at("pseudo").get<double>();
        const auto& cells = j.at("cells");
        if (cells.size() != model.sites * 12) {
            throw DataError("GLM model: expected " + std::to_string(model.sites * 12) + " cells");
        }
        model.cells.resize(model.sites * 12);
        for (const auto& e : cells) {
            const auto s = e.at("site").get<std::size_t>();
            const int m = e.at("month").get<int>();
            if (s >= model.sites || m < 1 || m > 12) {
                throw DataError("GLM model: cell index out of range");
            }
            auto& c = model.cells[s * 12 + static_cast<std::size_t>(m - 1)];
            c.p01 = e.at("p01").get<double>();
            c.p11 = e.at("p11").get<double>();
            if (!(c.p01 >= 0 && c.p01 <= 1 && c.p11 >= 0 && c.p11 <= 1)) {
                throw DataError("GLM model: transition probability outside [0, 1]");
            }
            const double inf = std::numeric_limits<double>::infinity();
            c.beta0 = number_or_inf(e.at("beta0"), c.p01 > 0.5 ? inf : -inf);
            c.beta1 = number_or_inf(e.at("beta1"), std::nan(""));
            c.method = e.at("method").get<int>();
            const auto& n = e.at("counts");
            c.counts = {n.at(0).get<double>(), n.at(1).get<double>(), n.at(2).get<double>(), n.at(3).get<double>()};
        }
    } catch (const nlohmann::json::exception& ex) {
        throw DataError(std::string("malformed GLM model: ") + ex.what());
    }
    return model;
}

} // namespace precipgen::glm
