#pragma once

#include "precipgen/observations.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>

namespace precipgen {

/// Loads a long-form `date,lat,lon,precip_mm` CSV. Every (date, site) cell of
/// the grid/calendar must appear exactly once. Throws DataError naming the
/// offending line for missing, duplicate, negative, non-finite or out-of-span
/// records.
ObservationSet load_observations(const std::filesystem::path& path, const GridSpec& grid,
                                 const Calendar& calendar);

/// As above with grid and calendar inferred from the file: lat/lon sets give
/// the cell centres (resolution from their spacing, `fallback_resolution` when
/// an axis has a single value) and the date range gives the calendar.
ObservationSet load_observations(const std::filesystem::path& path, double fallback_resolution = 0.05);

/// Writes canonical order: date-major, site ascending.
void write_observations(const ObservationSet& obs, const std::filesystem::path& path);

/// Sidecar file written next to a simulations CSV.
std::filesystem::path metadata_path_for(const std::filesystem::path& csv_path);

/// Writes `sim_id,date,lat,lon,precip_mm` rows (sim-major, then date, then
/// site) plus metadata.json in the same directory. Throws DataError when the
/// set violates its invariants.
void write_simulations(const SimulationSet& sims, const std::filesystem::path& path);

/// Reads a simulations CSV. Grid and calendar come from the metadata sidecar
/// when present, otherwise they are inferred from the rows.
SimulationSet read_simulations(const std::filesystem::path& path);

nlohmann::json to_json(const GridSpec& grid);
GridSpec grid_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Calendar& calendar);
Calendar calendar_from_json(const nlohmann::json& j);

/// Shortest round-trip decimal representation.
std::string format_number(double value);
std::string format_number(float value);

nlohmann::json read_json_file(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline; deterministic key order.
void write_json_file(const nlohmann::json& j, const std::filesystem::path& path);

} // namespace precipgen
