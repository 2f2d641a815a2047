#include "precipgen/grid.hpp"

#include "precipgen/error.hpp"

#include <cmath>
#include <stdexcept>

namespace precipgen {

namespace {

std::size_t cells_along(double lo, double hi, double res, const char* axis) {
    const double cells = std::round((hi - lo) / res);
    if (cells < 1.0 || std::abs((hi - lo) / res - cells) > 1e-6) {
        throw ConfigError(std::string("grid ") + axis + " extent is not a positive multiple of the resolution");
    }
    return static_cast<std::size_t>(cells);
}

} // namespace

GridSpec::GridSpec(double lat_min, double lat_max, double lon_min, double lon_max, double resolution)
    : lat_min_(lat_min), lat_max_(lat_max), lon_min_(lon_min), lon_max_(lon_max), resolution_(resolution) {
    if (!(resolution > 0.0) || !std::isfinite(resolution)) {
        throw ConfigError("grid resolution must be positive");
    }
    if (!(lat_max > lat_min) || !(lon_max > lon_min)) {
        throw ConfigError("grid bounds must satisfy min < max");
    }
    n_lat_ = cells_along(lat_min, lat_max, resolution, "latitude");
    n_lon_ = cells_along(lon_min, lon_max, resolution, "longitude");
}

LatLon GridSpec::site(std::size_t index) const {
    if (index >= site_count()) {
        throw std::out_of_range("site index out of range");
    }
    const std::size_t i = index / n_lon_;
    const std::size_t j = index % n_lon_;
    return {lat_min_ + (static_cast<double>(i) + 0.5) * resolution_,
            lon_min_ + (static_cast<double>(j) + 0.5) * resolution_};
}

std::optional<std::size_t> GridSpec::find_site(double lat, double lon) const noexcept {
    const double fi = (lat - lat_min_) / resolution_ - 0.5;
    const double fj = (lon - lon_min_) / resolution_ - 0.5;
    const double ri = std::round(fi);
    const double rj = std::round(fj);
    if (std::abs(fi - ri) > 0.25 || std::abs(fj - rj) > 0.25) {
        return std::nullopt;
    }
    if (ri < 0.0 || rj < 0.0 || ri >= static_cast<double>(n_lat_) || rj >= static_cast<double>(n_lon_)) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(ri) * n_lon_ + static_cast<std::size_t>(rj);
}

bool GridSpec::compatible_with(const GridSpec& other) const noexcept {
    constexpr double tol = 1e-9;
    return std::abs(lat_min_ - other.lat_min_) < tol && std::abs(lat_max_ - other.lat_max_) < tol &&
           std::abs(lon_min_ - other.lon_min_) < tol && std::abs(lon_max_ - other.lon_max_) < tol &&
           std::abs(resolution_ - other.resolution_) < tol;
}

} // namespace precipgen
