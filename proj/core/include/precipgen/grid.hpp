#pragma once

#include <cstddef>
#include <optional>
#include <utility>

namespace precipgen {

struct LatLon {
    double lat = 0.0;
    double lon = 0.0;
};

/// Regular lat/lon box divided into square cells of `resolution` degrees.
/// Sites are cell centres, indexed row-major by (lat ascending, lon ascending).
class GridSpec {
public:
    GridSpec() = default;
    GridSpec(double lat_min, double lat_max, double lon_min, double lon_max, double resolution);

    [[nodiscard]] double lat_min() const noexcept { return lat_min_; }
    [[nodiscard]] double lat_max() const noexcept { return lat_max_; }
    [[nodiscard]] double lon_min() const noexcept { return lon_min_; }
    [[nodiscard]] double lon_max() const noexcept { return lon_max_; }
    [[nodiscard]] double resolution() const noexcept { return resolution_; }

    [[nodiscard]] std::size_t n_lat() const noexcept { return n_lat_; }
    [[nodiscard]] std::size_t n_lon() const noexcept { return n_lon_; }
    [[nodiscard]] std::size_t site_count() const noexcept { return n_lat_ * n_lon_; }

    [[nodiscard]] LatLon site(std::size_t index) const;

    /// Site index whose centre lies within a quarter cell of (lat, lon).
    [[nodiscard]] std::optional<std::size_t> find_site(double lat, double lon) const noexcept;

    /// Same bounds and resolution within 1e-9 degrees.
    [[nodiscard]] bool compatible_with(const GridSpec& other) const noexcept;

    friend bool operator==(const GridSpec& a, const GridSpec& b) noexcept { return a.compatible_with(b); }

private:
    double lat_min_ = 0.0;
    double lat_max_ = 0.0;
    double lon_min_ = 0.0;
    double lon_max_ = 0.0;
    double resolution_ = 1.0;
    std::size_t n_lat_ = 0;
    std::size_t n_lon_ = 0;
};

} // namespace precipgen
