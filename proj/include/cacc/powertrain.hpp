#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cacc {

struct TrajectoryLog;

enum class PowertrainMode { FE, FC };

std::string to_string(PowertrainMode mode);
PowertrainMode parse_mode(const std::string& text);

// Rectilinear grid with bilinear interpolation. Row axis and column axis must be
// strictly increasing. The last column axis value may be +inf, in which case
// that column is only used for queries exactly at +inf.
class Grid2D {
public:
    Grid2D() = default;
    Grid2D(std::vector<double> rows, std::vector<double> cols, std::vector<double> values);

    const std::vector<double>& row_axis() const { return rows_; }
    const std::vector<double>& col_axis() const { return cols_; }
    double at(std::size_t i, std::size_t j) const { return values_[i * cols_.size() + j]; }

    bool in_hull(double r, double c) const;
    // Throws OutOfHull outside the axes.
    double interpolate(double r, double c) const;

    // CSV: first row is "<label>,c0,c1,...", every later row "r_i,v_i0,v_i1,...".
    static Grid2D read_csv(const std::filesystem::path& path);
    void write_csv(const std::filesystem::path& path, const std::string& corner_label) const;

private:
    std::vector<double> rows_;
    std::vector<double> cols_;
    std::vector<double> values_;
};

// Efficiency as a function of (axle torque [N m], axle speed [rad/s]).
class EfficiencyMap {
public:
    static EfficiencyMap constant(double eta);
    static EfficiencyMap from_grid(Grid2D grid, bool extrapolate = false);

    // Throws OutOfHull when the query leaves the grid and extrapolation is off.
    double eval(double torque, double speed) const;

private:
    std::optional<double> constant_;
    Grid2D grid_;
    bool extrapolate_ = false;
};

struct PowertrainConfig {
    double r_g = 4.0;    // gear ratio wheels -> powertrain axle
    double P_a = 500.0;  // auxiliary electric power [W]
    EfficiencyMap eta_m = EfficiencyMap::constant(0.90);
    EfficiencyMap eta_e = EfficiencyMap::constant(0.36);

    void validate() const;
};

struct PowerSplit {
    double P_b = 0.0;  // battery [W]
    double P_f = 0.0;  // fuel [W]
};

// Battery and fuel power for one sample. Outside T_w > 0, omega_w > 0 the
// prime-mover term is zero and only the auxiliary load remains.
PowerSplit instantaneous_power(const PowertrainConfig& cfg, PowertrainMode mode, double T_w, double omega_w);

struct EnergyTotals {
    double wheel = 0.0;    // [J], positive wheel power only
    double battery = 0.0;  // [J]
    double fuel = 0.0;     // [J]
};

// Trapezoidal integration over log records [first, last).
EnergyTotals trajectory_energy(const PowertrainConfig& cfg, PowertrainMode mode, const TrajectoryLog& log,
                               std::size_t first = 0, std::size_t last = static_cast<std::size_t>(-1));

// (measured - predicted) / RMS(measured - predicted)
std::vector<double> normalized_residuals(std::span<const double> predicted, std::span<const double> measured);

double rms(std::span<const double> xs);

// Fractional energy saving over (speed [m/s], time gap [s]) for one mode.
struct SavingsTable {
    PowertrainMode mode = PowertrainMode::FE;
    Grid2D grid;  // rows: speed, cols: time gap (last column may be +inf)
    bool model_derived = false;
};

// Bilinear lookup, clamped to [-1, 1]. Throws OutOfHull outside the table.
double energy_saving_lookup(const SavingsTable& table, double speed, double time_gap);

}  // namespace cacc

#include <cacc/dynamics.hpp>

namespace cacc {

// Steady-state saving surface derived from the drag and powertrain models:
// 1 - P(v, gap = v * tau) / P(v, open road). The last column is +inf with value 0.
SavingsTable model_savings_table(const VehicleParams& params, const PowertrainConfig& cfg, PowertrainMode mode,
                                 const std::vector<double>& speeds, const std::vector<double>& time_gaps);

}  // namespace cacc
