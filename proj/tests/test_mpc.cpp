#include <cacc/errors.hpp>
#include <cacc/invariant_set.hpp>
#include <cacc/mpc.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <memory>

using namespace cacc;

namespace {

std::shared_ptr<const InvariantFamily> family() {
    static auto f = std::make_shared<const InvariantFamily>(
        compute_invariant_family(build_linear_system(VehicleParams{}, ControlBounds{})));
    return f;
}

V2VMessage steady_message(long stamp, int n_t, double a = 0.0) {
    V2VMessage m;
    m.stamp = stamp;
    m.N_T = n_t;
    m.a_bounds = std::make_pair(-6.0, 3.0);
    m.forecast.assign(static_cast<std::size_t>(n_t) + 1, a);
    return m;
}

}  // namespace

TEST(Predictor, OutsideTrustWindowIsWorstCase) {
    const auto m = steady_message(10, 0, -2.0);
    EXPECT_EQ(predict_front_accel(&m, 10, -6.0), -2.0);
    for (long k = 11; k < 30; ++k) EXPECT_EQ(predict_front_accel(&m, k, -6.0), -6.0);
    const auto w = steady_message(10, 3, -2.0);
    EXPECT_EQ(predict_front_accel(&w, 13, -6.0), -2.0);
    EXPECT_EQ(predict_front_accel(&w, 14, -6.0), -6.0);
}

TEST(Predictor, RadarOnly) {
    V2VMessage m;
    m.stamp = 4;
    for (long k = 0; k < 20; ++k) EXPECT_EQ(predict_front_accel(&m, k, -9.0), -9.0);
    EXPECT_EQ(predict_front_accel(nullptr, 3, -3.0), -3.0);
    const FrontPredictor p(std::nullopt, -6.0);
    EXPECT_EQ(p.accel(0), -6.0);
}

TEST(Shift, NoDelayIsClampedObservation) {
    const FrontPredictor p(std::nullopt, -6.0);
    const auto x = shift_state({7, 30.0, -0.1}, {-0.05}, p, 0.2);
    EXPECT_EQ(x.d, 30.0);
    EXPECT_EQ(x.v, 0.0);
    EXPECT_EQ(x.v_f, 0.0);
}

TEST(Shift, OneStepDelay) {
    const FrontPredictor p(steady_message(9, 2), -6.0);
    const auto x = shift_state({9, 50.0, 25.0}, {15.0, 15.3}, p, 0.2);
    EXPECT_NEAR(x.d, 52.0, 1e-12);
    EXPECT_NEAR(x.v_f, 25.0, 1e-12);
    EXPECT_EQ(x.v, 15.3);
}

TEST(Shift, FrontSpeedClamps) {
    const FrontPredictor p(std::nullopt, -6.0);
    const auto x = shift_state({9, 50.0, 0.5}, {15.0, 15.0}, p, 0.2);
    EXPECT_EQ(x.v_f, 0.0);
}

TEST(Shift, MissingHistory) {
    const FrontPredictor p(std::nullopt, -6.0);
    EXPECT_THROW(shift_state({0, 50.0, 0.5}, {}, p, 0.2), InsufficientHistory);
}

TEST(Solve, TwoStepClosedForm) {
    // With two steps only u_0 moves d_2, and the cost is a scalar quadratic in u_0.
    const VehicleParams p;
    MpcConfig cfg;
    cfg.N_p = 2;
    cfg.D = 0.0;
    cfg.R = 10.0;
    const double t_s = cfg.bounds.t_s;
    const PlatoonState x0{30.0, 20.0, 20.0};
    const double load = road_load(p, {}, x0.v, Gap(x0.d));
    const double a = x0.d + t_s * t_s * load / p.M;
    const double b = -t_s * t_s * cfg.torque_scale / (p.M * p.R_w);
    const double u_star = -cfg.Q * b * (a - cfg.bounds.d_min) / (cfg.Q * b * b + cfg.R);
    ASSERT_GT(u_star * cfg.torque_scale, 50.0);
    ASSERT_LT(u_star * cfg.torque_scale, 1000.0);

    const FrontPredictor pred(steady_message(0, 4), -6.0);
    const auto sol = solve_mpc(p, {}, x0, 0, pred, *family(), cfg, 0.0);
    ASSERT_EQ(sol.status, SolveStatus::Optimal);
    EXPECT_NEAR(sol.inputs[0], u_star * cfg.torque_scale, 1e-3);
    EXPECT_NEAR(sol.inputs[1], 0.0, 1e-3);
}

TEST(Solve, InfeasibleStartFallsBack) {
    MpcConfig cfg;
    const FrontPredictor pred(std::nullopt, -6.0);
    const auto sol = solve_mpc(VehicleParams{}, {}, {4.0, 20.0, 20.0}, 0, pred, *family(), cfg, 0.0);
    EXPECT_EQ(sol.status, SolveStatus::InfeasibleFallback);
    ASSERT_EQ(sol.inputs.size(), 20u);
    for (double u : sol.inputs) EXPECT_EQ(u, cfg.bounds.T_min);
}

TEST(Solve, PlanRespectsConstraints) {
    const VehicleParams p;
    MpcConfig cfg;
    const auto& b = cfg.bounds;
    for (const PlatoonState x0 : {PlatoonState{50.0, 15.0, 25.0}, PlatoonState{25.0, 25.0, 25.0},
                                  PlatoonState{60.0, 28.0, 22.0}, PlatoonState{8.0, 3.0, 5.0}}) {
        for (int n_t : {0, 3, 8}) {
            const FrontPredictor pred(steady_message(0, n_t), -6.0);
            const auto sol = solve_mpc(p, {}, x0, 0, pred, *family(), cfg, 100.0);
            ASSERT_NE(sol.status, SolveStatus::InfeasibleFallback) << x0.d << ' ' << x0.v << ' ' << x0.v_f;
            for (double u : sol.inputs) {
                EXPECT_GE(u, b.T_min - 1e-6);
                EXPECT_LE(u, b.T_max + 1e-6);
            }
            // the QP constrains the linearized prediction; the stored states are the nonlinear
            // rollout of the final inputs, which may differ by the linearization error
            for (std::size_t k = 1; k < sol.states.size(); ++k) {
                EXPECT_GE(sol.states[k].d, b.d_min - 1e-3);
                EXPECT_GE(sol.states[k].v, -1e-3);
                EXPECT_LE(sol.states[k].v, b.v_max + 1e-3);
            }
            const auto& T = family()->slices[sol.terminal_node];
            Eigen::Vector2d xe(sol.states.back().d, sol.states.back().v);
            EXPECT_TRUE(contains(T, xe, 1e-3));
        }
    }
}

TEST(Solve, Deterministic) {
    const VehicleParams p;
    MpcConfig cfg;
    const FrontPredictor pred(steady_message(0, 3), -6.0);
    const PlatoonState x0{40.0, 18.0, 25.0};
    const auto a = solve_mpc(p, {}, x0, 0, pred, *family(), cfg, 50.0);
    const auto b = solve_mpc(p, {}, x0, 0, pred, *family(), cfg, 50.0);
    EXPECT_EQ(a.inputs, b.inputs);
    EXPECT_EQ(a.cost, b.cost);
}

TEST(Solve, TerminalNodeFollowsWorstCase) {
    const VehicleParams p;
    MpcConfig cfg;
    const PlatoonState x0{60.0, 20.0, 20.0};
    const auto radar = solve_mpc(p, {}, x0, 0, FrontPredictor(std::nullopt, -6.0), *family(), cfg, 0.0);
    EXPECT_EQ(radar.front_speed.back(), 0.0);
    EXPECT_EQ(radar.terminal_node, 0u);
    const auto v2v = solve_mpc(p, {}, x0, 0, FrontPredictor(steady_message(0, 8), -6.0), *family(), cfg, 0.0);
    EXPECT_NEAR(v2v.front_speed.back(), 20.0 - 11 * 1.2, 1e-9);
    EXPECT_GT(v2v.terminal_node, 0u);
}

TEST(ClosedLoop, ApproachesWithoutViolation) {
    const VehicleParams p;
    MpcConfig cfg;
    ChannelConfig ch;
    FrontTrack front(50.0, 25.0, std::vector<double>(300, 0.0), cfg.bounds.t_s, 1);
    ClosedLoopWorld world(p, {}, std::move(front), {50.0, 15.0, 25.0});
    CaccController ctrl(p, cfg, family(), steady_torque(p, {}, 15.0, Gap(50.0)));
    TrajectoryLog log;
    log.t_s = cfg.bounds.t_s;
    log.R_w = p.R_w;
    for (int k = 0; k < 150; ++k) step_closed_loop(world, ch, ctrl, log);
    ASSERT_EQ(log.size(), 150u);
    for (const auto& r : log.records) {
        EXPECT_GE(r.d, 5.0 - 1e-6);
        EXPECT_NE(r.status, SolveStatus::InfeasibleFallback);
    }
    EXPECT_GT(log.records[10].v, 15.0);
    EXPECT_LT(log.records.back().d, 50.0);
}

TEST(ClosedLoop, AppliesFirstInput) {
    const VehicleParams p;
    MpcConfig cfg;
    ChannelConfig ch;
    ch.trust_horizon = 3;
    FrontTrack front(30.0, 20.0, std::vector<double>(100, 0.0), cfg.bounds.t_s, 1);
    ClosedLoopWorld world(p, {}, std::move(front), {30.0, 20.0, 20.0});
    CaccController ctrl(p, cfg, family(), 0.0);
    TrajectoryLog log;
    log.t_s = cfg.bounds.t_s;
    log.R_w = p.R_w;
    const double u = step_closed_loop(world, ch, ctrl, log);
    EXPECT_EQ(u, ctrl.last_solution().inputs.front());
    EXPECT_EQ(log.records.front().T_w, u);
}

TEST(ClosedLoop, FallbackBrakesFully) {
    const VehicleParams p;
    MpcConfig cfg;
    ChannelConfig ch;
    FrontTrack front(4.0, 20.0, std::vector<double>(100, 0.0), cfg.bounds.t_s, 1);
    ClosedLoopWorld world(p, {}, std::move(front), {4.0, 20.0, 20.0});
    CaccController ctrl(p, cfg, family(), 0.0);
    TrajectoryLog log;
    log.t_s = cfg.bounds.t_s;
    log.R_w = p.R_w;
    const double u = step_closed_loop(world, ch, ctrl, log);
    EXPECT_EQ(u, cfg.bounds.T_min);
    EXPECT_EQ(log.records.front().status, SolveStatus::InfeasibleFallback);
}

TEST(Config, Validation) {
    MpcConfig c;
    c.N_p = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.R = -1.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.bounds.d_min = 0.0;
    EXPECT_THROW(c.validate(), ConfigError);
}
