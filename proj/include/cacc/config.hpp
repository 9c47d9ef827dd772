#pragma once

#include <cacc/scenario.hpp>

#include <filesystem>
#include <iosfwd>

namespace cacc {

// INI file with sections [vehicle], [powertrain], [mpc], [channel], [scenario]
// and [invariant]. Missing keys keep their defaults; unknown keys are errors.
// Relative file paths inside the file resolve against its directory.
ScenarioConfig load_config(const std::filesystem::path& path);
ScenarioConfig parse_config(std::istream& is, const std::filesystem::path& base_dir = {});

void write_config(std::ostream& os, const ScenarioConfig& cfg);
void save_config(const std::filesystem::path& path, const ScenarioConfig& cfg);

// [vehicle] section only, as written by the fitting tool.
VehicleParams load_vehicle_params(const std::filesystem::path& path);
void save_vehicle_params(const std::filesystem::path& path, const VehicleParams& p);

}  // namespace cacc
