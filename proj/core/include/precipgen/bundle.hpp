#pragma once

#include "precipgen/semiparametric.hpp"
#include "precipgen/wilks.hpp"

#include <filesystem>
#include <string>

namespace precipgen::bundle {

/// Writes bundle.json, thresholds.json, transitions.json, arima.json and
/// library.json. The resampling library is rebuilt on load from the training
/// observations, which bundle.json references by absolute path and SHA-256.
void save(const semiparametric::SemiParamModel& model, const std::filesystem::path& dir,
          const std::filesystem::path& observations_path);

/// Throws DataError when files are missing or malformed or the referenced
/// observations changed.
semiparametric::SemiParamModel load_semiparametric(const std::filesystem::path& dir);

/// Writes bundle.json, glm.json, omega_occurrence.json, omega_amounts.json and
/// amounts.json; self-contained.
void save(const wilks::WilksModel& model, const std::filesystem::path& dir);
wilks::WilksModel load_wilks(const std::filesystem::path& dir);

/// Generator name recorded in a bundle directory.
std::string generator_of(const std::filesystem::path& dir);

/// Grid and calendar the bundle was fitted on.
std::pair<GridSpec, Calendar> training_domain(const std::filesystem::path& dir);

} // namespace precipgen::bundle
