#pragma once

#include <cacc/dynamics.hpp>
#include <cacc/powertrain.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace cacc {

struct DriveLogSample {
    long k = 0;
    double v = 0.0;         // [m/s]
    double a = 0.0;         // [m/s^2]
    double F_w = 0.0;       // wheel force [N]
    double d_target = 0.0;  // nominal gap label [m], +inf when driving alone
    PowertrainMode mode = PowertrainMode::FE;
    double theta = 0.0;     // grade [rad]
};

// Header k,v,a,F_w,d_target,mode,theta; d_target accepts "inf".
std::vector<DriveLogSample> load_drive_log(const std::filesystem::path& path);
void save_drive_log(const std::filesystem::path& path, const std::vector<DriveLogSample>& samples);

using ClusterKey = std::pair<double, PowertrainMode>;
using Clusters = std::map<ClusterKey, std::vector<DriveLogSample>>;

// Partition by (gap label, mode). When a label set is given, any other label is an error.
Clusters cluster(const std::vector<DriveLogSample>& samples,
                 const std::optional<std::vector<double>>& labels = std::nullopt);

struct Split {
    std::vector<DriveLogSample> train;
    std::vector<DriveLogSample> validation;
};

// Stratified per cluster and deterministic in seed. Clusters with at least two
// samples appear on both sides.
Split split(const std::vector<DriveLogSample>& samples, double fraction, std::uint64_t seed);

// The identified coefficients, in fitting order.
struct DragCoefficients {
    double C_r = 0.01;
    double C_v = 0.0;
    double C_x0 = 0.3;
    double C_x1 = 50.0;
    double C_x2 = 100.0;
};

struct FitOptions {
    int max_iter = 500;
    double gradient_tol = 1e-8;
    double damping = 1e-9;
    // Coefficients held at their initial value, ordered C_r, C_v, C_x0, C_x1, C_x2.
    std::array<bool, 5> fixed{};
};

struct FitResult {
    DragCoefficients coef;
    double train_cost = 0.0;     // sum of squared force residuals [N^2]
    double initial_cost = 0.0;
    double validation_rms = 0.0; // filled by validate()
    std::map<ClusterKey, double> per_cluster_cost;
    std::vector<double> cost_history;  // accepted iterates
    int iterations = 0;
    bool converged = false;
    bool rank_deficient = false;
    std::vector<std::string> warnings;
};

// Force residual F_w - M a - M g C_r - C_v v - 1/2 rho A C_x(d) v^2 at zero grade.
double force_residual(const VehicleParams& known, const DragCoefficients& c, const DriveLogSample& s);

// Box-constrained Gauss-Newton. M, rho, A and g come from `known`; the five
// coefficients start from `initial`. Grade must be zero on every sample.
FitResult fit(const std::vector<DriveLogSample>& train, const VehicleParams& known,
              const DragCoefficients& initial = {}, const FitOptions& opts = {});

// Predicted and measured wheel torques over the validation set.
struct TorqueSeries {
    std::vector<double> predicted;
    std::vector<double> measured;
};
TorqueSeries torque_series(const VehicleParams& known, const DragCoefficients& c,
                           const std::vector<DriveLogSample>& samples);

// Normalized wheel-torque residuals e_w. Sets fit.validation_rms to the raw RMS [N m].
std::vector<double> validate(FitResult& fit, const VehicleParams& known, const std::vector<DriveLogSample>& validation);

VehicleParams with_coefficients(VehicleParams p, const DragCoefficients& c);

void write_fit_report(std::ostream& os, const FitResult& fit, std::size_t n_train, std::size_t n_validation);

}  // namespace cacc
