#pragma once

#include <cacc/bounds.hpp>
#include <cacc/dynamics.hpp>
#include <cacc/invariant_set.hpp>
#include <cacc/trajectory.hpp>
#include <cacc/v2v.hpp>

#include <memory>
#include <optional>
#include <vector>

namespace cacc {

struct MpcConfig {
    int N_p = 20;
    double Q = 1.0;     // gap tracking [1/m^2]
    double R = 1e-6;    // input, on torque in kN m
    double D = 1e-4;    // input increment, on torque in kN m
    double torque_scale = 1000.0;
    int sqp_iters = 2;
    double qp_tol = 1e-8;
    ControlBounds bounds;

    void validate() const;
};

struct MpcSolution {
    std::vector<double> inputs;              // T_w(t) .. T_w(t+N_p-1)
    std::vector<PlatoonState> states;        // x(t) .. x(t+N_p), as predicted by the last QP
    std::vector<double> front_speed;         // predicted v_f(t) .. v_f(t+N_p)
    SolveStatus status = SolveStatus::InfeasibleFallback;
    double cost = 0.0;
    std::size_t terminal_node = 0;
    int passes = 0;  // SQP passes that produced a feasible QP
};

// Front acceleration assumed for step k by a controller at step t: the forecast
// inside the trust window, a_min elsewhere and always a_min without a forecast.
class FrontPredictor {
public:
    FrontPredictor(std::optional<V2VMessage> msg, double a_min) : msg_(std::move(msg)), a_min_(a_min) {}
    double accel(long k) const;
    const std::optional<V2VMessage>& message() const { return msg_; }

private:
    std::optional<V2VMessage> msg_;
    double a_min_;
};

double predict_front_accel(const V2VMessage* msg, long k, double a_min);

// Rolls the delayed observation forward to step t. ego_speeds holds the measured
// ego speed for steps obs.stamp .. t (h + 1 values).
PlatoonState shift_state(const Observation& obs, const std::vector<double>& ego_speeds, const FrontPredictor& pred,
                         double t_s);

// One receding-horizon solve from x_est at step t.
MpcSolution solve_mpc(const VehicleParams& params, const RoadProfile& road, const PlatoonState& x_est, long t,
                      const FrontPredictor& pred, const InvariantFamily& family, const MpcConfig& cfg,
                      double prev_input, const std::vector<double>* warm_start = nullptr);

class CaccController {
public:
    CaccController(VehicleParams params, MpcConfig cfg, std::shared_ptr<const InvariantFamily> family,
                   double initial_input);

    // Returns the wheel torque to apply at step t.
    double step(const RoadProfile& road, long t, const Observation& obs, const std::optional<V2VMessage>& msg,
                const std::vector<double>& ego_speeds);

    const MpcSolution& last_solution() const { return last_; }
    const MpcConfig& config() const { return cfg_; }
    const PlatoonState& last_estimate() const { return x_est_; }

private:
    VehicleParams params_;
    MpcConfig cfg_;
    std::shared_ptr<const InvariantFamily> family_;
    double prev_input_;
    std::vector<double> warm_;
    MpcSolution last_;
    PlatoonState x_est_;
};

// True plant plus front vehicle and the ego's own measurement history.
struct ClosedLoopWorld {
    VehicleParams params;
    RoadProfile road;
    double t_s = 0.2;
    FrontTrack front;
    std::vector<double> gap_history;    // true gap for steps first_step .. t
    std::vector<double> speed_history;  // true ego speed for steps first_step .. t
    long first_step = 0;
    long t = 0;
    PlatoonState x;

    // Pre-roll steps before 0 hold the initial ego speed and the front track's pre-roll.
    ClosedLoopWorld(VehicleParams params, RoadProfile road, FrontTrack front, PlatoonState x0);
};

// Measure, solve, apply u*(t|t), advance the plant one step, append to the log.
double step_closed_loop(ClosedLoopWorld& world, const ChannelConfig& channel, CaccController& ctrl,
                        TrajectoryLog& log);

}  // namespace cacc
