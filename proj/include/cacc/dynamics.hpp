#pragma once

#include <limits>
#include <optional>

namespace cacc {

// Longitudinal vehicle parameters, SI units. Defaults are the identified
// values for the 2017 Ioniq PHEV rear vehicle.
struct VehicleParams {
    double M = 1844.0;      // mass [kg]
    double R_w = 0.288;     // wheel radius [m]
    double rho = 1.206;     // air density [kg/m^3]
    double A = 2.629;       // frontal area [m^2]
    double C_r = 0.0093;    // rolling coefficient [-]
    double C_v = 0.0;       // viscous coefficient [N s/m]
    double C_x0 = 0.3350;   // isolated drag coefficient [-]
    double C_x1 = 68.3193;  // drag reduction numerator [m]
    double C_x2 = 142.4522; // drag reduction offset [m]
    double g = 9.81;        // gravity [m/s^2]

    // Throws ConfigError when an invariant is broken.
    void validate() const;
};

// Inter-vehicle gap. An open road (no front vehicle) is a distinct state,
// not a large number.
class Gap {
public:
    constexpr explicit Gap(double metres) : metres_(metres) {}
    static constexpr Gap open_road() { return Gap(); }

    constexpr bool is_open() const { return !metres_.has_value(); }
    // Only valid when !is_open().
    constexpr double metres() const { return *metres_; }

private:
    constexpr Gap() = default;
    std::optional<double> metres_;
};

// State of the control-oriented model: gap, ego speed, front speed.
struct PlatoonState {
    double d = 0.0;
    double v = 0.0;
    double v_f = 0.0;
};

struct RoadProfile {
    double theta = 0.0;  // grade [rad], constant over a prediction horizon
};

// C_x(d) = C_x0 (1 - C_x1 / (d + C_x2)); C_x0 for an open road.
double drag_coefficient(const VehicleParams& p, Gap d);

// Derivative of C_x with respect to the gap; 0 for an open road.
double drag_coefficient_slope(const VehicleParams& p, Gap d);

// M g (sin th + C_r cos th) + C_v v + 1/2 rho A C_x(d) v^2
double road_load(const VehicleParams& p, const RoadProfile& road, double v, Gap d);

// One explicit-Euler step of the switched model. Drag is evaluated at the
// pre-step gap; both speeds are clamped at zero.
PlatoonState step(const VehicleParams& p, const RoadProfile& road, const PlatoonState& x,
                  double wheel_torque, double front_accel, double t_s, Gap drag_gap);

// Convenience overload: drag evaluated at x.d.
PlatoonState step(const VehicleParams& p, const RoadProfile& road, const PlatoonState& x,
                  double wheel_torque, double front_accel, double t_s);

// Wheel torque that holds speed v at gap d.
double steady_torque(const VehicleParams& p, const RoadProfile& road, double v, Gap d);

inline double positive_part(double x) { return x >= 0.0 ? x : 0.0; }

}  // namespace cacc
