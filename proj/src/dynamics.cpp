#include "cacc/dynamics.hpp"

#include <cmath>
#include <string>

#include "cacc/errors.hpp"

namespace cacc {

void VehicleParams::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(std::string("vehicle parameters: ") + what);
    };
    require(M > 0.0, "M must be positive");
    require(R_w > 0.0, "R_w must be positive");
    require(rho > 0.0, "rho must be positive");
    require(A > 0.0, "A must be positive");
    require(C_r >= 0.0, "C_r must be nonnegative");
    require(C_v >= 0.0, "C_v must be nonnegative");
    require(C_x0 >= 0.0, "C_x0 must be nonnegative");
    require(C_x1 < C_x2, "C_x1 < C_x2 is required for C_x(d) > 0 on d >= 0");
    require(g > 0.0, "g must be positive");
}

double drag_coefficient(const VehicleParams& p, Gap d) {
    if (d.is_open()) return p.C_x0;
    const double denom = d.metres() + p.C_x2;
    if (!(denom > 0.0)) throw DomainError("drag_coefficient: d + C_x2 must be positive");
    return p.C_x0 * (1.0 - p.C_x1 / denom);
}

double drag_coefficient_slope(const VehicleParams& p, Gap d) {
    if (d.is_open()) return 0.0;
    const double denom = d.metres() + p.C_x2;
    if (!(denom > 0.0)) throw DomainError("drag_coefficient_slope: d + C_x2 must be positive");
    return p.C_x0 * p.C_x1 / (denom * denom);
}

double road_load(const VehicleParams& p, const RoadProfile& road, double v, Gap d) {
    const double grade = p.M * p.g * (std::sin(road.theta) + p.C_r * std::cos(road.theta));
    return grade + p.C_v * v + 0.5 * p.rho * p.A * drag_coefficient(p, d) * v * v;
}

PlatoonState step(const VehicleParams& p, const RoadProfile& road, const PlatoonState& x,
                  double wheel_torque, double front_accel, double t_s, Gap drag_gap) {
    PlatoonState next;
    next.d = x.d + t_s * (x.v_f - x.v);
    next.v = positive_part(x.v + (t_s / p.M) * (wheel_torque / p.R_w - road_load(p, road, x.v, drag_gap)));
    next.v_f = positive_part(x.v_f + t_s * front_accel);
    return next;
}

PlatoonState step(const VehicleParams& p, const RoadProfile& road, const PlatoonState& x,
                  double wheel_torque, double front_accel, double t_s) {
    return step(p, road, x, wheel_torque, front_accel, t_s, Gap(x.d));
}

double steady_torque(const VehicleParams& p, const RoadProfile& road, double v, Gap d) {
    return road_load(p, road, v, d) * p.R_w;
}

}  // namespace cacc
