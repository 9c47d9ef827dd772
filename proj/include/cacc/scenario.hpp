#pragma once

#include <cacc/invariant_set.hpp>
#include <cacc/mpc.hpp>
#include <cacc/powertrain.hpp>
#include <cacc/trajectory.hpp>
#include <cacc/v2v.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace cacc {

enum class SweepVar { None, H, AMin, NT, Noise };

std::string to_string(SweepVar s);
SweepVar parse_sweep(const std::string& s);  // h | a_min | n_t | noise | none

// Front acceleration as (start time [s], accel [m/s^2]) events; each holds until the next.
struct FrontEvent {
    double t = 0.0;
    double a = 0.0;
};

struct InvariantSettings {
    InvariantOptions options;
    GradeRange grade;
    bool half_drag_shrink = false;
    std::string cache_dir;  // empty: no disk cache
};

struct ScenarioConfig {
    double duration = 60.0;  // [s]
    double front_v0 = 25.0;
    double ego_v0 = 15.0;
    double d0 = 50.0;
    std::vector<FrontEvent> front_events;
    RoadProfile road;
    SweepVar sweep = SweepVar::None;
    std::vector<double> values;

    VehicleParams vehicle;
    PowertrainConfig powertrain;
    std::string eta_m_source = "0.9";  // constant or CSV map path, as written in the config
    std::string eta_e_source = "0.36";
    std::string savings_fe;  // optional CSV paths
    std::string savings_fc;
    MpcConfig mpc;
    ChannelConfig channel;
    InvariantSettings invariant;

    // Table values for a named sweep.
    static std::vector<double> default_values(SweepVar s);
    void validate() const;
    long steps() const;
};

// Invariant families keyed by a_min, computed once and shared between runs.
class FamilyStore {
public:
    std::shared_ptr<const InvariantFamily> get(const ScenarioConfig& cfg);

private:
    std::mutex mu_;
    std::map<std::uint64_t, std::shared_ptr<const InvariantFamily>> families_;
};

// The configuration a single sweep value runs with.
ScenarioConfig apply_sweep_value(const ScenarioConfig& cfg, SweepVar var, double value);
std::string sweep_label(SweepVar var, double value);

std::vector<double> front_accel_plan(const ScenarioConfig& cfg, long steps);

// One closed loop with the configuration as given.
TrajectoryLog simulate(const ScenarioConfig& cfg, FamilyStore& store, const std::string& label);

// Front vehicle alone at its constant speed on an open road.
TrajectoryLog baseline_log(const ScenarioConfig& cfg);

struct RunSet {
    SweepVar sweep = SweepVar::None;
    std::vector<double> values;
    std::vector<TrajectoryLog> logs;  // one per value, in sweep order
    TrajectoryLog baseline;
};

// Sweep values run concurrently; results are independent of scheduling.
RunSet run(const ScenarioConfig& cfg, FamilyStore* store = nullptr);

struct SteadyWindow {
    std::size_t first = 0;  // record indices [first, last)
    std::size_t last = 0;
    double t_a = 0.0;
    double t_b = 0.0;
};

// Earliest sample after which every span_s window has gap range below tol.
// Throws NoSteadyState when there is none.
SteadyWindow detect_steady_state(const TrajectoryLog& log, double tol = 0.05, double span_s = 5.0);

struct SafetySummary {
    double min_gap = 0.0;
    double min_speed = 0.0;
    double max_speed = 0.0;
    double min_torque = 0.0;
    double max_torque = 0.0;
    long fallbacks = 0;
    bool ok = false;
};

SafetySummary check_safety(const TrajectoryLog& log, const ControlBounds& b, double tol = 1e-6);

// RMS of torque increments over records with t >= from_t.
double rms_torque_increment(const TrajectoryLog& log, double from_t);

struct EnergyRow {
    std::string label;
    double value = 0.0;
    bool steady = false;
    double t_a = 0.0;
    double t_b = 0.0;
    double steady_gap = 0.0;
    double wheel = 0.0;          // [%] of the front vehicle
    double battery_fe = 0.0;     // powertrain model
    double fuel_fc = 0.0;
    double battery_table = 0.0;  // savings-table interpolation
    double fuel_table = 0.0;
    double rms_du = 0.0;
    SafetySummary safety;
};

struct EnergyReport {
    SweepVar sweep = SweepVar::None;
    std::vector<EnergyRow> rows;  // front vehicle first, then the sweep order
    bool savings_from_model = true;
};

EnergyReport energy_report(const RunSet& runs, const VehicleParams& vehicle, const PowertrainConfig& pt,
                           const ControlBounds& bounds, const SavingsTable& fe_table, const SavingsTable& fc_table);

// Loads the configured savings tables, or builds model-derived ones.
std::pair<SavingsTable, SavingsTable> savings_tables(const ScenarioConfig& cfg);

void write_report_csv(std::ostream& os, const EnergyReport& report);
void print_report(std::ostream& os, const EnergyReport& report);

// Trajectory CSVs, report CSV, plot data and a manifest. Byte-identical for identical inputs.
void export_runs(const RunSet& runs, const EnergyReport& report, const ScenarioConfig& cfg,
                 const std::filesystem::path& out_dir);

// Reads an export directory back.
RunSet load_runs(const std::filesystem::path& dir);

}  // namespace cacc
