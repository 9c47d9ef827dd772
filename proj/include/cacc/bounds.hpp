#pragma once

namespace cacc {

// State, input and disturbance limits shared by the invariant-set design and the controller.
struct ControlBounds {
    double t_s = 0.2;       // sample time [s]
    double d_min = 5.0;     // minimum gap [m]
    double v_max = 40.0;    // speed limit [m/s]
    double T_min = -2500.0; // wheel torque limits [N m]
    double T_max = 1083.0;
    double a_min = -6.0;    // front acceleration bounds [m/s^2]
    double a_max = 3.0;     // never stated for the reference vehicle; a documented assumption

    void validate() const;
};

}  // namespace cacc
